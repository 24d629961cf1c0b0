// Combines fitted attrition and spending models into per-customer prediction
// tables, holdout evaluation metrics, new-customer predictions, and discount
// conversion.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clv/estimation.hpp"
#include "clv/pnbd_dynamic.hpp"

namespace clv {

struct DiscountSpec {
    double annual_rate = 0.10;  // discrete annual rate d

    double per_unit(const TimeUnit& unit) const;  // ln(1+d) / units_per_year
};

double discount_per_unit(double annual_rate, const TimeUnit& unit);

struct PredictionRow {
    std::string customer_id;
    Timestamp period_first = 0, period_last = 0;
    double period_length = 0.0;  // time units
    double palive = 0.0;
    double cet = 0.0;
    double dert_or_dect = 0.0;
    std::optional<double> predicted_mean_spending;
    std::optional<double> predicted_period_spending;
    std::optional<double> predicted_clv;
    std::optional<double> actual_x;
    std::optional<double> actual_total_spending;
};

struct PredictOptions {
    // horizon in time units or as an end date; defaults to the holdout end
    std::optional<double> horizon_units;
    std::optional<Timestamp> horizon_date;
    DiscountSpec discount;
    int threads = 0;
};

// ds may be the fitting dataset or replacement data (newdata semantics: model
// parameters reused, customer inputs recomputed)
std::vector<PredictionRow> predict_table(const FitResult& attrition_fit, const ClvDataset& ds,
                                         const std::optional<FitResult>& spending_fit,
                                         const PredictOptions& options);

// column layout mirroring the package output; the discounted column is DERT
// or DECT depending on the model family
Table prediction_table_to_table(const std::vector<PredictionRow>& rows,
                                const std::string& family, bool with_spending,
                                bool with_actuals);

struct EvaluationMetrics {
    double mae_cet = 0.0, rmse_cet = 0.0;
    std::optional<double> mae_spending, rmse_spending;
    std::size_t n = 0;
};

EvaluationMetrics evaluate(const std::vector<PredictionRow>& rows);

struct NewCustomerPrediction {
    double expected_transactions = 0.0;  // includes the first purchase
    std::optional<double> expected_spend_per_order;
    std::optional<double> expected_total;
};

// covariate scenario for the prospective customer: static vectors or a
// dynamic path starting at acquisition
struct NewCustomerScenario {
    std::vector<double> cov_trans, cov_life;
    std::optional<CovariatePath> dynamic_path;
};

NewCustomerPrediction new_customer(const FitResult& attrition_fit, double horizon,
                                   const std::optional<FitResult>& spending_fit,
                                   const NewCustomerScenario& scenario = {});

}  // namespace clv
