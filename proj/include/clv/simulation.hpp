// Generative samplers for the implemented models: the oracle backbone for
// parameter recovery and prediction validation, plus posterior-correct Monte
// Carlo continuation of customer histories.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clv/dataset.hpp"
#include "clv/gamma_gamma.hpp"
#include "clv/pnbd.hpp"
#include "clv/pnbd_dynamic.hpp"

namespace clv {

struct SimScenario {
    std::size_t n_customers = 1000;
    PnbdParams params;
    std::optional<GgParams> gg;           // attach spending when present
    double estimation_length = 104.0;     // time units
    double holdout_length = 0.0;
    TimeUnit time_unit{TimeUnit::Kind::week};
    std::uint64_t seed = 1;               // mandatory, reproducibility
    // one binary covariate on both processes (coefficient vectors must then
    // have one entry)
    bool static_covariate = false;
    bool dynamic_covariate = false;
    int season_period = 8;  // dynamic: on/off block length in time units
    Timestamp start_date = 1577836800;  // 2020-01-01
};

struct SimTruth {
    std::string id;
    double lambda0 = 0.0;  // base purchase rate
    double mu0 = 0.0;      // base attrition rate
    double omega = 0.0;    // lifetime in time units
    bool alive_at_estimation_end = false;
    double covariate = 0.0;
};

struct SimResult {
    ClvDataset dataset;  // ingested with the scenario's split attached
    std::vector<TransactionRecord> log;
    std::vector<SimTruth> truth;
};

SimResult simulate_pnbd(const SimScenario& sc);

// draws nu_i ~ Gamma(q, gamma) per customer and z ~ Gamma(p, nu_i) per
// transaction; returns the priced copy of the log
std::vector<TransactionRecord> simulate_gg_spends(const std::vector<TransactionRecord>& log,
                                                  const GgParams& gg, std::uint64_t seed);

struct ContinuationResult {
    double mean_count = 0.0;
    double se_count = 0.0;
    double mean_discounted = 0.0;
    double se_discounted = 0.0;
    double ess = 0.0;          // effective sample size of the posterior grid
    bool degenerate = false;   // ess below 50
};

// Monte Carlo continuation for the standard/static model: samples
// (lambda, mu, alive) from the posterior given (x, t_x, T) on a quadrature
// grid, then simulates forward over (T, T+horizon].
ContinuationResult continue_paths(const PnbdParams& p, const CustomerSummary& cs,
                                  double horizon, int n_paths, double discount_rate,
                                  std::uint64_t seed,
                                  const std::vector<double>& cov_trans = {},
                                  const std::vector<double>& cov_life = {});

// dynamic-model analog; the path must cover [0, T + horizon]
ContinuationResult continue_paths_dynamic(const PnbdParams& p, const DynCustomer& c,
                                          double horizon, int n_paths, double discount_rate,
                                          std::uint64_t seed);

// scenario description round-trip for the CLI
SimScenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const SimScenario& sc);

}  // namespace clv
