#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fbsde {

/// Dense [paths x steps x components] array of doubles.
///
/// Indexing is logical (path, step, component); storage is step-major so
/// that a single time slice over all paths is contiguous, which is the
/// access pattern of the per-step regressions.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t paths, std::size_t steps, std::size_t comps, double fill = 0.0)
        : paths_(paths), steps_(steps), comps_(comps), data_(paths * steps * comps, fill) {}

    std::size_t paths() const { return paths_; }
    std::size_t steps() const { return steps_; }
    std::size_t comps() const { return comps_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t path, std::size_t step, std::size_t comp = 0) {
        return data_[index(path, step, comp)];
    }
    double operator()(std::size_t path, std::size_t step, std::size_t comp = 0) const {
        return data_[index(path, step, comp)];
    }

    std::span<double> row(std::size_t path, std::size_t step) {
        return {data_.data() + index(path, step, 0), comps_};
    }
    std::span<const double> row(std::size_t path, std::size_t step) const {
        return {data_.data() + index(path, step, 0), comps_};
    }

    /// All paths at one step: [paths x comps] contiguous.
    std::span<const double> slice(std::size_t step) const {
        return {data_.data() + step * paths_ * comps_, paths_ * comps_};
    }

    const std::vector<double>& raw() const { return data_; }
    std::vector<double>& raw() { return data_; }

    bool operator==(const Tensor3&) const = default;

private:
    std::size_t index(std::size_t path, std::size_t step, std::size_t comp) const {
        return (step * paths_ + path) * comps_ + comp;
    }

    std::size_t paths_ = 0;
    std::size_t steps_ = 0;
    std::size_t comps_ = 0;
    std::vector<double> data_;
};

}  // namespace fbsde
