#include "nmrsim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "nmrsim/errors.hpp"

namespace nmrsim {

double bhattacharyya(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    if (p.size() != q.size()) throw DimensionError("bhattacharyya: dimension mismatch");
    const double sp = p.sum();
    const double sq = q.sum();
    if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6)
        throw NumericError("bhattacharyya: inputs not normalized");
    if (p.minCoeff() < -1e-12 || q.minCoeff() < -1e-12)
        throw NumericError("bhattacharyya: negative probability");

    double direct = 0.0;   // sum sqrt(p q)
    double sq_diff = 0.0;  // sum (sqrt p - sqrt q)^2
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double pi = std::max(0.0, p(i) / sp);
        const double qi = std::max(0.0, q(i) / sq);
        const double rp = std::sqrt(pi);
        const double rq = std::sqrt(qi);
        direct += rp * rq;
        sq_diff += (rp - rq) * (rp - rq);
    }
    const double from_diff = 1.0 - 0.5 * sq_diff;
    if (std::abs(direct - from_diff) > 1e-12)
        throw NumericError("bhattacharyya: algebraic cross-check failed by " +
                           std::to_string(direct - from_diff));
    return std::clamp(direct, 0.0, 1.0);
}

double bhattacharyya(const PopulationRecord& p, const PopulationRecord& q) {
    return bhattacharyya(p.effective(), q.effective());
}

void FidelitySeries::validate() const {
    if (bc_mean.size() != times_s.size() || bc_min.size() != times_s.size() ||
        bc_max.size() != times_s.size())
        throw ConfigError("FidelitySeries: inconsistent lengths");
    for (std::size_t i = 0; i < bc_mean.size(); ++i)
        for (double v : {bc_mean[i], bc_min[i], bc_max[i]})
            if (!(v >= 0.0 && v <= 1.0)) throw NumericError("FidelitySeries: value outside [0,1]");
}

FidelitySeries
bc_series(const std::vector<double>& times_s,
          const std::vector<std::vector<Eigen::VectorXd>>& noisy_populations_per_time,
          const std::vector<std::vector<Eigen::VectorXd>>& ideal_populations_per_time) {
    if (noisy_populations_per_time.size() != times_s.size() ||
        ideal_populations_per_time.size() != times_s.size())
        throw ConfigError("bc_series: one population set per time point required");
    FidelitySeries series;
    series.times_s = times_s;
    for (std::size_t t = 0; t < times_s.size(); ++t) {
        const auto& noisy = noisy_populations_per_time[t];
        const auto& ideal = ideal_populations_per_time[t];
        if (noisy.size() != ideal.size() || noisy.empty())
            throw ConfigError("bc_series: state sets must match and be nonempty");
        double mean = 0.0, lo = 1.0, hi = 0.0;
        for (std::size_t s = 0; s < noisy.size(); ++s) {
            const double bc = bhattacharyya(noisy[s], ideal[s]);
            mean += bc;
            lo = std::min(lo, bc);
            hi = std::max(hi, bc);
        }
        series.bc_mean.push_back(mean / static_cast<double>(noisy.size()));
        series.bc_min.push_back(lo);
        series.bc_max.push_back(hi);
    }
    series.validate();
    return series;
}

Spectrum bc_series_spectrum(const FidelitySeries& series, const NusSchedule& sched, double dt_s,
                            const IstOptions& opts) {
    series.validate();
    if (series.bc_mean.size() != sched.indices.size())
        throw ConfigError("bc_series_spectrum: series not sampled on the schedule");
    std::vector<double> grid(static_cast<std::size_t>(sched.grid_size), 0.0);
    for (std::size_t i = 0; i < sched.indices.size(); ++i)
        grid[static_cast<std::size_t>(sched.indices[i])] = series.bc_mean[i];
    return ist_s_reconstruct(grid, sched, dt_s, opts);
}

double squared_bc_per_gate(double bc, std::int64_t n_two_qubit_gates) {
    if (n_two_qubit_gates < 1) throw ConfigError("squared_bc_per_gate: need at least one gate");
    if (!(bc > 0.0 && bc <= 1.0)) throw ConfigError("squared_bc_per_gate: bc must lie in (0,1]");
    return std::pow(bc * bc, 1.0 / static_cast<double>(n_two_qubit_gates));
}

} // namespace nmrsim
