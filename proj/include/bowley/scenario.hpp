#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bowley/choquet.hpp"
#include "bowley/errors.hpp"

namespace bowley {

inline constexpr std::size_t kMonths = 12;

/// The finite state space: one entry per empirical state (county-year or
/// synthetic draw). `weather` is row-major rows x 12 per scenario and is
/// empty when rows == 0 (indemnity-only data).
struct ScenarioSet {
    std::size_t rows = 0;
    std::vector<std::string> ids;
    std::vector<double> losses;
    std::vector<double> probs;
    std::vector<std::vector<double>> weather;

    std::size_t size() const noexcept { return losses.size(); }
    bool has_weather() const noexcept { return rows > 0; }

    void validate() const {
        const std::size_t n = losses.size();
        if (n == 0) throw DomainError("scenario set is empty");
        if (probs.size() != n || ids.size() != n) throw DomainError("scenario set: column lengths differ");
        if (rows > 0 && weather.size() != n) throw DomainError("scenario set: missing weather grids");
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (!std::isfinite(losses[k]) || losses[k] < 0.0)
                throw DomainError("scenario " + ids[k] + ": loss must be finite and >= 0");
            if (!(probs[k] > 0.0)) throw DomainError("scenario " + ids[k] + ": probability must be > 0");
            total += probs[k];
            if (rows > 0) {
                if (weather[k].size() != rows * kMonths)
                    throw DomainError("scenario " + ids[k] + ": weather grid must be rows x 12");
                for (double v : weather[k])
                    if (!std::isfinite(v)) throw DomainError("scenario " + ids[k] + ": non-finite weather value");
            }
        }
        if (std::abs(total - 1.0) > 1e-12) throw DomainError("scenario set: probabilities must sum to 1");
    }

    OutcomeSample loss_sample() const { return OutcomeSample(losses, probs); }

    /// Equal-weight set from losses only.
    static ScenarioSet from_losses(std::vector<double> losses) {
        ScenarioSet s;
        const std::size_t n = losses.size();
        s.losses = std::move(losses);
        s.probs.assign(n, n ? 1.0 / double(n) : 0.0);
        for (std::size_t k = 0; k < n; ++k) s.ids.push_back(std::to_string(k));
        s.validate();
        return s;
    }
};

}  // namespace bowley
