#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "driftsearch/errors.hpp"
#include "driftsearch/grid.hpp"
#include "driftsearch/targets.hpp"
#include "driftsearch/transport.hpp"

namespace driftsearch {

/// Survey accomplishment: the share of initial probability mass no longer in
/// the field (sensed away, or advected out of an open domain).
inline double eta(const ScalarField& m) { return 1.0 - total_mass(m); }

/// Detection rate over the full ensemble; escaped targets stay in the
/// denominator as undetected.
inline double kappa(const TargetSet& set) {
    if (set.particles.empty()) throw ConfigError("kappa needs a non-empty target set");
    return static_cast<double>(set.count(TargetStatus::DETECTED)) /
           static_cast<double>(set.particles.size());
}

/// Agent speed over mean flow speed.
inline double lambda_ratio(double v, const FlowSeries& flow) {
    const double mean = flow.mean_speed();
    if (!(mean > 0.0)) throw ConfigError("velocity ratio undefined for zero mean flow");
    return v / mean;
}

struct StepRecord {
    double t = 0.0;
    double eta = 0.0;       // from the control field (frozen copy in static mode)
    double kappa = 0.0;
    double mass_in_domain = 0.0;
    int n_detected = 0;
    int n_escaped = 0;
    double eta_true = 0.0;  // from the fully transported field
    double potential_ms = 0.0;
    double avoidance_ms = 0.0;
    double transport_ms = 0.0;
};

namespace detail {

inline std::string csv_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace detail

/// Deterministic per-step metrics: everything except wall-clock timings,
/// which land in their own file so identical runs stay byte-identical here.
inline void write_metrics_csv(const std::string& path, const std::vector<StepRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "t,eta,kappa,mass_in_domain,n_detected,n_escaped,eta_true\n";
    for (const StepRecord& r : records) {
        f << detail::csv_num(r.t) << ',' << detail::csv_num(r.eta) << ','
          << detail::csv_num(r.kappa) << ',' << detail::csv_num(r.mass_in_domain) << ','
          << r.n_detected << ',' << r.n_escaped << ',' << detail::csv_num(r.eta_true) << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

inline void write_timings_csv(const std::string& path, const std::vector<StepRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "t,potential_ms,avoidance_ms,transport_ms\n";
    for (const StepRecord& r : records) {
        f << detail::csv_num(r.t) << ',' << detail::csv_num(r.potential_ms) << ','
          << detail::csv_num(r.avoidance_ms) << ',' << detail::csv_num(r.transport_ms) << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace driftsearch
