#include "clv/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "clv/errors.hpp"
#include "clv/pnbd_dynamic.hpp"
#include "clv/util.hpp"

namespace clv {

double discount_per_unit(double annual_rate, const TimeUnit& unit) {
    if (annual_rate < 0.0) throw DomainError("discount rate must be nonnegative");
    return std::log1p(annual_rate) / unit.units_per_year();
}

double DiscountSpec::per_unit(const TimeUnit& unit) const {
    return discount_per_unit(annual_rate, unit);
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(15);
    os << v;
    return os.str();
}

// map the attrition fit's covariate names onto the dataset's columns
std::vector<double> reorder_static_row(const std::vector<std::string>& fit_names,
                                       const CovariateTable& table, const std::string& id) {
    std::vector<double> out;
    const auto& row = table.static_rows.at(id);
    for (const auto& name : fit_names) {
        auto it = std::find(table.names.begin(), table.names.end(), name);
        if (it == table.names.end())
            throw InputError("dataset lacks covariate '" + name + "' required by the model");
        out.push_back(row[it - table.names.begin()]);
    }
    return out;
}

}  // namespace

std::vector<PredictionRow> predict_table(const FitResult& attrition_fit, const ClvDataset& ds,
                                         const std::optional<FitResult>& spending_fit,
                                         const PredictOptions& options) {
    if (attrition_fit.family.rfind("pnbd", 0) != 0)
        throw CapabilityError("prediction needs a latent-attrition fit");
    if (options.threads > 0) set_max_threads(options.threads);
    const bool dynamic = attrition_fit.family == "pnbd-dynamic";
    const bool has_static_cov = attrition_fit.family == "pnbd-static";

    double horizon;
    if (options.horizon_units) {
        horizon = *options.horizon_units;
    } else if (options.horizon_date) {
        horizon = ds.to_units(ds.estimation_end, *options.horizon_date);
    } else if (ds.has_holdout()) {
        horizon = ds.holdout_length();
    } else {
        throw UsageError("no holdout period: a prediction horizon must be given");
    }
    if (horizon < 0.0) throw DomainError("prediction horizon must be nonnegative");

    const double delta = options.discount.per_unit(ds.time_unit);
    const PnbdParams params = attrition_fit.pnbd_params();

    // spending posterior inputs when a spending model is attached
    std::map<std::string, SpendingObservation> spend_obs;
    GgParams gg{};
    if (spending_fit) {
        if (spending_fit->family != "gg")
            throw CapabilityError("spending predictions need a Gamma-Gamma fit");
        gg = spending_fit->gg_params();
        const bool remove_first = spending_fit->remove_first_transaction;
        if (ds.has_prices) {
            std::map<std::string, std::pair<int, double>> acc;
            for (const auto& tr : ds.transactions) {
                if (tr.date > ds.estimation_end) continue;
                const auto& cs = ds.summary_for(tr.customer_id);
                if (remove_first && tr.date == cs.first_date) continue;
                auto& slot = acc[tr.customer_id];
                slot.first += 1;
                slot.second += tr.price.value_or(0.0);
            }
            for (const auto& [id, v] : acc)
                if (v.first >= 1 && v.second > 0.0)
                    spend_obs[id] = {v.first, v.second / v.first};
        }
    }

    // holdout actuals over (estimation_end, estimation_end + horizon]
    const Timestamp horizon_end =
        ds.estimation_end +
        static_cast<Timestamp>(std::llround(horizon * ds.time_unit.seconds_per_unit()));
    const bool actuals_available =
        ds.has_holdout() && horizon_end <= *ds.holdout_end + 1;
    std::map<std::string, std::pair<double, double>> actuals;  // id -> (x, spending)
    if (actuals_available) {
        for (const auto& tr : ds.transactions) {
            if (tr.date <= ds.estimation_end || tr.date > horizon_end) continue;
            auto& slot = actuals[tr.customer_id];
            slot.first += 1.0;
            slot.second += tr.price.value_or(0.0);
        }
    }

    const Timestamp first_day = ds.estimation_end + (ds.time_unit.day_granularity()
                                                         ? kSecondsPerDay
                                                         : Timestamp{1});

    std::vector<PredictionRow> rows(ds.summaries.size());
    std::vector<DynCustomer> dyn(dynamic ? ds.summaries.size() : 0);
    if (dynamic)
        for (std::size_t i = 0; i < ds.summaries.size(); ++i)
            dyn[i] = compile_dynamic_customer(ds, ds.summaries[i].customer_id);

    parallel_for(ds.summaries.size(), [&](std::size_t i) {
        const CustomerSummary& cs = ds.summaries[i];
        PredictionRow row;
        row.customer_id = cs.customer_id;
        row.period_first = first_day;
        row.period_last = horizon_end;
        row.period_length = horizon;
        if (dynamic) {
            row.palive = pnbd_dynamic_palive(params, dyn[i], attrition_fit.quad_order);
            row.cet = pnbd_dynamic_dect(params, dyn[i], horizon, 0.0, attrition_fit.quad_order);
            row.dert_or_dect =
                pnbd_dynamic_dect(params, dyn[i], horizon, delta, attrition_fit.quad_order);
        } else {
            std::vector<double> ct, cl;
            if (has_static_cov) {
                if (!ds.cov_trans || !ds.cov_life)
                    throw InputError("model was fit with covariates but the data has none");
                ct = reorder_static_row(attrition_fit.cov_names_trans, *ds.cov_trans,
                                        cs.customer_id);
                cl = reorder_static_row(attrition_fit.cov_names_life, *ds.cov_life,
                                        cs.customer_id);
            }
            row.palive = pnbd_palive(params, cs, ct, cl);
            row.cet = horizon > 0.0 ? pnbd_cet(params, cs, horizon, ct, cl) : 0.0;
            row.dert_or_dect = pnbd_dert(params, cs, delta, ct, cl);
        }
        if (spending_fit) {
            auto it = spend_obs.find(cs.customer_id);
            const double mean_spend = (it != spend_obs.end())
                                          ? expected_mean_spending(gg, it->second)
                                          : expected_mean_spending(gg);
            row.predicted_mean_spending = mean_spend;
            row.predicted_period_spending = row.cet * mean_spend;
            row.predicted_clv = row.dert_or_dect * mean_spend;
        }
        if (actuals_available) {
            auto it = actuals.find(cs.customer_id);
            row.actual_x = (it != actuals.end()) ? it->second.first : 0.0;
            row.actual_total_spending = (it != actuals.end()) ? it->second.second : 0.0;
        }
        rows[i] = std::move(row);
    });
    std::sort(rows.begin(), rows.end(), [](const PredictionRow& a, const PredictionRow& b) {
        return a.customer_id < b.customer_id;
    });
    return rows;
}

Table prediction_table_to_table(const std::vector<PredictionRow>& rows,
                                const std::string& family, bool with_spending,
                                bool with_actuals) {
    const bool dynamic = family == "pnbd-dynamic";
    Table t;
    t.header = {"Id", "period.first", "period.last", "period.length", "PAlive", "CET",
                dynamic ? "DECT" : "DERT"};
    if (with_actuals) {
        t.header.push_back("actual.x");
        t.header.push_back("actual.total.spending");
    }
    if (with_spending) {
        t.header.push_back("predicted.mean.spending");
        t.header.push_back("predicted.period.spending");
        t.header.push_back(dynamic ? "predicted.period.CLV" : "predicted.CLV");
    }
    for (const auto& r : rows) {
        std::vector<std::string> row{r.customer_id,
                                     format_date(r.period_first),
                                     format_date(r.period_last),
                                     fmt(r.period_length),
                                     fmt(r.palive),
                                     fmt(r.cet),
                                     fmt(r.dert_or_dect)};
        if (with_actuals) {
            row.push_back(fmt(r.actual_x.value_or(0.0)));
            row.push_back(fmt(r.actual_total_spending.value_or(0.0)));
        }
        if (with_spending) {
            row.push_back(fmt(r.predicted_mean_spending.value_or(0.0)));
            row.push_back(fmt(r.predicted_period_spending.value_or(0.0)));
            row.push_back(fmt(r.predicted_clv.value_or(0.0)));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

EvaluationMetrics evaluate(const std::vector<PredictionRow>& rows) {
    EvaluationMetrics m;
    double ae = 0.0, se = 0.0, ae_s = 0.0, se_s = 0.0;
    bool any_spend = false;
    for (const auto& r : rows) {
        if (!r.actual_x) throw InputError("evaluation needs rows with holdout actuals");
        const double err = r.cet - *r.actual_x;
        ae += std::fabs(err);
        se += err * err;
        if (r.predicted_period_spending && r.actual_total_spending) {
            const double err_s = *r.predicted_period_spending - *r.actual_total_spending;
            ae_s += std::fabs(err_s);
            se_s += err_s * err_s;
            any_spend = true;
        }
        ++m.n;
    }
    if (m.n == 0) throw InputError("no rows to evaluate");
    m.mae_cet = ae / m.n;
    m.rmse_cet = std::sqrt(se / m.n);
    if (any_spend) {
        m.mae_spending = ae_s / m.n;
        m.rmse_spending = std::sqrt(se_s / m.n);
    }
    return m;
}

NewCustomerPrediction new_customer(const FitResult& attrition_fit, double horizon,
                                   const std::optional<FitResult>& spending_fit,
                                   const NewCustomerScenario& scenario) {
    if (horizon < 0.0) throw DomainError("horizon must be nonnegative");
    const PnbdParams params = attrition_fit.pnbd_params();
    NewCustomerPrediction out;
    if (attrition_fit.family == "pnbd-dynamic") {
        if (!scenario.dynamic_path)
            throw UsageError("dynamic models need a covariate path for the new customer");
        out.expected_transactions =
            1.0 + pnbd_dynamic_expected_transactions(params, *scenario.dynamic_path, 0.0,
                                                     horizon);
    } else {
        out.expected_transactions =
            1.0 + pnbd_unconditional_expectation(params, horizon, scenario.cov_trans,
                                                 scenario.cov_life);
    }
    if (spending_fit) {
        if (spending_fit->remove_first_transaction)
            throw UsageError(
                "new-customer predictions need a spending model fitted on all "
                "transactions (remove_first_transaction = false)");
        const GgParams gg = spending_fit->gg_params();
        out.expected_spend_per_order = expected_mean_spending(gg);
        out.expected_total = out.expected_transactions * *out.expected_spend_per_order;
    }
    return out;
}

}  // namespace clv
