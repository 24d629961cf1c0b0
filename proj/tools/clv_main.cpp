// Command-line surface: summarize, series, subset, fit, predict, diagnose,
// simulate, bootstrap. Exit codes: 0 success, 1 usage/validation error,
// 2 fit converged with warnings, 3 numerical failure.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "clv/bootstrap.hpp"
#include "clv/csv.hpp"
#include "clv/errors.hpp"
#include "clv/estimation.hpp"
#include "clv/prediction.hpp"
#include "clv/simulation.hpp"
#include "clv/util.hpp"

using namespace clv;

namespace {

struct DatasetArgs {
    std::string input;
    std::string date_format = "ymd";
    std::string time_unit = "week";
    std::string split;     // number of units or a date
    std::string data_end;  // date
    std::string id_col = "Id", date_col = "Date", price_col = "Price";
    bool keep_seconds = false;

    void attach(CLI::App* cmd, bool required = true) {
        auto* opt = cmd->add_option("--input", input, "transaction CSV (Id, Date[, Price])");
        if (required) opt->required();
        cmd->add_option("--date-format", date_format, "ymd, dmy or mdy");
        cmd->add_option("--time-unit", time_unit, "hour, day, week or year");
        cmd->add_option("--split", split,
                        "estimation split: number of time units or a date");
        cmd->add_option("--data-end", data_end, "observation end beyond the last record");
        cmd->add_option("--id-col", id_col, "customer id column name");
        cmd->add_option("--date-col", date_col, "date column name");
        cmd->add_option("--price-col", price_col, "price column name");
        cmd->add_flag("--keep-seconds", keep_seconds,
                      "keep second resolution instead of collapsing to days");
    }

    ClvDataset load() const {
        auto records = records_from_csv(input, date_format, id_col, date_col, price_col);
        IngestOptions opt;
        opt.time_unit = TimeUnit::parse(time_unit);
        opt.second_resolution = keep_seconds;
        if (!split.empty()) {
            try {
                std::size_t pos = 0;
                const double units = std::stod(split, &pos);
                if (pos == split.size())
                    opt.estimation_split = units;
                else
                    opt.estimation_split = parse_date(split, date_format);
            } catch (const std::invalid_argument&) {
                opt.estimation_split = parse_date(split, date_format);
            }
        }
        if (!data_end.empty()) opt.data_end = parse_date(data_end, date_format);
        return ingest(records, opt);
    }
};

struct CovariateArgs {
    std::string life_file, trans_file;
    std::string cov_date_col = "Cov.Date";
    std::string formula;  // "life part | trans part", names or "."

    void attach(CLI::App* cmd) {
        cmd->add_option("--cov-life", life_file, "attrition covariate CSV");
        cmd->add_option("--cov-trans", trans_file, "transaction covariate CSV");
        cmd->add_option("--cov-date-col", cov_date_col,
                        "interval date column (dynamic covariates)");
        cmd->add_option("--formula", formula,
                        "covariate selection 'life | trans'; '.' selects all");
    }
};

std::pair<std::vector<std::string>, std::vector<std::string>> parse_formula(
    const std::string& text) {
    const auto bar = text.find('|');
    if (bar == std::string::npos)
        throw UsageError("formula needs two parts separated by '|' (attrition | transaction)");
    auto parse_part = [](std::string part) {
        std::vector<std::string> names;
        std::string cur;
        for (char c : part + " ") {
            if (std::isspace(static_cast<unsigned char>(c)) || c == '+' || c == ',') {
                if (!cur.empty()) names.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        return names;
    };
    return {parse_part(text.substr(0, bar)), parse_part(text.substr(bar + 1))};
}

CovariateTable load_covariates(const std::string& path, const std::string& id_col,
                               const std::string& date_col, const std::string& date_format,
                               const std::vector<std::string>& want) {
    const CsvTable csv = read_csv_file(path);
    const int id_idx = csv.require_column(id_col);
    const int date_idx = csv.column(date_col);
    const bool dynamic = date_idx >= 0;
    std::vector<std::string> names;
    std::vector<int> cols;
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
        if (static_cast<int>(c) == id_idx || static_cast<int>(c) == date_idx) continue;
        if (!want.empty() && want[0] != "." &&
            std::find(want.begin(), want.end(), csv.header[c]) == want.end())
            continue;
        names.push_back(csv.header[c]);
        cols.push_back(static_cast<int>(c));
    }
    if (!want.empty() && want[0] != "." && names.size() != want.size()) {
        for (const auto& w : want)
            if (std::find(names.begin(), names.end(), w) == names.end())
                throw InputError("covariate '" + w + "' not found in " + path);
    }
    if (names.empty()) throw InputError("no covariate columns selected from " + path);
    std::vector<std::string> ids;
    std::vector<Timestamp> dates;
    std::vector<std::vector<std::string>> columns(names.size());
    for (const auto& row : csv.rows) {
        ids.push_back(row[id_idx]);
        if (dynamic) dates.push_back(parse_date(row[date_idx], date_format));
        for (std::size_t c = 0; c < cols.size(); ++c) columns[c].push_back(row[cols[c]]);
    }
    return CovariateTable::from_columns(dynamic ? CovariateTable::Mode::dynamic_cov
                                                : CovariateTable::Mode::static_cov,
                                        names, ids, dates, columns);
}

void write_table(const Table& table, const std::string& path) {
    CsvTable csv;
    csv.header = table.header;
    csv.rows = table.rows;
    if (path.empty())
        write_csv(std::cout, csv);
    else
        write_csv_file(path, csv);
}

std::string fmtnum(double v) {
    std::ostringstream os;
    os.precision(15);
    os << v;
    return os.str();
}

void emit_summary(const SummaryReport& rep, const std::string& out_path, bool as_json) {
    if (as_json) {
        nlohmann::json j;
        j["time_unit"] = rep.time_unit_name;
        j["estimation_length"] = rep.estimation_length;
        j["holdout_length"] = rep.holdout_length;
        j["n_customers"] = rep.n_customers;
        auto block = [](const PeriodStats& st) {
            nlohmann::json b;
            if (!st.present) return b;
            b["start"] = format_date(st.start);
            b["end"] = format_date(st.end);
            b["n_transactions"] = st.n_transactions;
            b["mean_transactions"] = st.mean_transactions;
            b["sd_transactions"] = st.sd_transactions;
            if (st.first_transaction) b["first_transaction"] = format_date(*st.first_transaction);
            if (st.last_transaction) b["last_transaction"] = format_date(*st.last_transaction);
            if (st.mean_spending) b["mean_spending"] = *st.mean_spending;
            if (st.sd_spending) b["sd_spending"] = *st.sd_spending;
            if (st.total_spending) b["total_spending"] = *st.total_spending;
            if (st.zero_repeaters) b["zero_repeaters"] = *st.zero_repeaters;
            if (st.zero_repeater_percent) b["zero_repeater_percent"] = *st.zero_repeater_percent;
            if (st.mean_interpurchase) b["mean_interpurchase"] = *st.mean_interpurchase;
            if (st.sd_interpurchase) b["sd_interpurchase"] = *st.sd_interpurchase;
            return b;
        };
        j["estimation"] = block(rep.estimation);
        if (rep.holdout.present) j["holdout"] = block(rep.holdout);
        j["total"] = block(rep.total);
        if (out_path.empty()) {
            std::cout << j.dump(2) << "\n";
        } else {
            std::ofstream out(out_path);
            out << j.dump(2) << "\n";
        }
        return;
    }
    Table t;
    t.header = {"statistic", "estimation", "holdout", "total"};
    auto opt_s = [](const std::optional<double>& v) {
        return v ? fmtnum(*v) : std::string("-");
    };
    auto add = [&](const std::string& name, auto get) {
        t.rows.push_back({name, get(rep.estimation),
                          rep.holdout.present ? get(rep.holdout) : "-", get(rep.total)});
    };
    add("period.start", [](const PeriodStats& s) { return format_date(s.start); });
    add("period.end", [](const PeriodStats& s) { return format_date(s.end); });
    add("transactions", [](const PeriodStats& s) { return std::to_string(s.n_transactions); });
    add("mean.transactions", [&](const PeriodStats& s) { return fmtnum(s.mean_transactions); });
    add("sd.transactions", [&](const PeriodStats& s) { return fmtnum(s.sd_transactions); });
    add("mean.spending", [&](const PeriodStats& s) { return opt_s(s.mean_spending); });
    add("sd.spending", [&](const PeriodStats& s) { return opt_s(s.sd_spending); });
    add("total.spending", [&](const PeriodStats& s) { return opt_s(s.total_spending); });
    add("zero.repeaters", [&](const PeriodStats& s) {
        return s.zero_repeaters ? std::to_string(*s.zero_repeaters) : std::string("-");
    });
    add("zero.repeater.percent",
        [&](const PeriodStats& s) { return opt_s(s.zero_repeater_percent); });
    add("mean.interpurchase", [&](const PeriodStats& s) { return opt_s(s.mean_interpurchase); });
    add("sd.interpurchase", [&](const PeriodStats& s) { return opt_s(s.sd_interpurchase); });
    t.rows.push_back({"customers", "-", "-", std::to_string(rep.n_customers)});
    t.rows.push_back({"estimation.length", fmtnum(rep.estimation_length), "-", "-"});
    if (rep.holdout.present)
        t.rows.push_back({"holdout.length", "-", fmtnum(rep.holdout_length), "-"});
    write_table(t, out_path);
}

FitResult load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return fit_from_json(buf.str());
}

ClvDataset attach_from_args(ClvDataset ds, const CovariateArgs& cov,
                            const std::string& id_col, const std::string& date_format) {
    if (cov.life_file.empty() != cov.trans_file.empty())
        throw UsageError("covariates need both --cov-life and --cov-trans");
    if (cov.life_file.empty()) return ds;
    std::vector<std::string> life_names{"."}, trans_names{"."};
    if (!cov.formula.empty()) std::tie(life_names, trans_names) = parse_formula(cov.formula);
    auto life = load_covariates(cov.life_file, id_col, cov.cov_date_col, date_format,
                                life_names);
    auto trans = load_covariates(cov.trans_file, id_col, cov.cov_date_col, date_format,
                                 trans_names);
    return attach_covariates(ds, std::move(life), std::move(trans));
}

// expected tracking increments for one model over [0, n_periods] in cohort time
std::vector<double> expected_tracking(const FitResult& fit, const ClvDataset& ds,
                                      int n_periods) {
    const PnbdParams params = fit.pnbd_params();
    std::vector<double> expected(n_periods + 1, 0.0);
    const bool dynamic = fit.family == "pnbd-dynamic";
    for (const auto& cs : ds.summaries) {
        const double start_units = ds.to_units(ds.estimation_start, cs.first_date);
        std::vector<double> ct, cl;
        DynCustomer dc;
        if (fit.family == "pnbd-static") {
            std::vector<std::string> missing;
            ct.reserve(fit.cov_names_trans.size());
            for (const auto& n : fit.cov_names_trans) {
                auto it = std::find(ds.cov_trans->names.begin(), ds.cov_trans->names.end(), n);
                if (it == ds.cov_trans->names.end())
                    throw InputError("dataset lacks covariate '" + n + "'");
                ct.push_back(ds.cov_trans->static_rows.at(
                    cs.customer_id)[it - ds.cov_trans->names.begin()]);
            }
            for (const auto& n : fit.cov_names_life) {
                auto it = std::find(ds.cov_life->names.begin(), ds.cov_life->names.end(), n);
                if (it == ds.cov_life->names.end())
                    throw InputError("dataset lacks covariate '" + n + "'");
                cl.push_back(ds.cov_life->static_rows.at(
                    cs.customer_id)[it - ds.cov_life->names.begin()]);
            }
        } else if (dynamic) {
            dc = compile_dynamic_customer(ds, cs.customer_id);
        }
        double prev = 0.0;
        for (int k = 1; k <= n_periods; ++k) {
            const double upto = static_cast<double>(k) - start_units;
            double cum = prev;
            if (upto > 0.0) {
                const double capped = dynamic
                                          ? std::min(upto, dc.path.coverage_end())
                                          : upto;
                cum = dynamic ? pnbd_dynamic_expected_transactions(params, dc.path, 0.0, capped)
                              : pnbd_unconditional_expectation(params, upto, ct, cl);
            }
            expected[k] += cum - prev;
            prev = cum;
        }
    }
    return expected;
}

int run(int argc, char** argv) {
    CLI::App app{"probabilistic customer-base analysis"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker cap (default: CLV_THREADS or 1)");

    // ---- summarize ----
    auto* cmd_sum = app.add_subcommand("summarize", "dataset summary statistics");
    DatasetArgs sum_ds;
    sum_ds.attach(cmd_sum);
    std::string sum_out;
    bool sum_json = false;
    cmd_sum->add_option("--output", sum_out, "output path (default stdout)");
    cmd_sum->add_flag("--json", sum_json, "emit JSON instead of CSV");

    // ---- series ----
    auto* cmd_series = app.add_subcommand("series", "descriptive series (plot data)");
    DatasetArgs ser_ds;
    ser_ds.attach(cmd_series);
    std::string ser_which = "tracking", ser_sample = "full", ser_out;
    std::vector<std::string> ser_ids;
    int ser_random = 0;
    std::uint64_t ser_seed = 1;
    bool ser_all_values = false;
    cmd_series->add_option("--which", ser_which,
                           "tracking|frequency|spending|interpurchasetime|timings");
    cmd_series->add_option("--sample", ser_sample, "estimation|holdout|full");
    cmd_series->add_option("--ids", ser_ids, "customer subset (timings)");
    cmd_series->add_option("--random-ids", ser_random, "random customer count (timings)");
    cmd_series->add_option("--seed", ser_seed, "seed for random id selection");
    cmd_series->add_flag("--all-values", ser_all_values,
                         "spending: every transaction instead of customer means");
    cmd_series->add_option("--output", ser_out, "output CSV (default stdout)");

    // ---- subset ----
    auto* cmd_subset = app.add_subcommand("subset", "filter aggregated transactions");
    DatasetArgs sub_ds;
    sub_ds.attach(cmd_subset);
    std::string sub_where, sub_sample = "full", sub_out;
    cmd_subset->add_option("--where", sub_where, "e.g. \"Price >= 50 & Price <= 100\"");
    cmd_subset->add_option("--sample", sub_sample, "estimation|holdout|full");
    cmd_subset->add_option("--output", sub_out, "output CSV (default stdout)");

    // ---- fit ----
    auto* cmd_fit = app.add_subcommand("fit", "estimate a model");
    DatasetArgs fit_ds;
    fit_ds.attach(cmd_fit);
    CovariateArgs fit_cov;
    fit_cov.attach(cmd_fit);
    std::string fit_family = "pnbd", fit_method, fit_out, fit_summary_out;
    bool fit_correlation = false, fit_no_hessian = false, fit_keep_first = false;
    double reg_trans = -1.0, reg_life = -1.0;
    std::vector<std::string> fit_constraints;
    std::vector<double> fit_starts;
    int fit_max_evals = 20000;
    cmd_fit->add_option("--family", fit_family, "pnbd or gg");
    cmd_fit->add_flag("--correlation", fit_correlation,
                      "correlate the attrition and transaction processes");
    cmd_fit->add_option("--reg-trans", reg_trans, "L2 weight, transaction coefficients");
    cmd_fit->add_option("--reg-life", reg_life, "L2 weight, attrition coefficients");
    cmd_fit->add_option("--constraint", fit_constraints,
                        "covariate names forced equal across processes");
    cmd_fit->add_option("--method", fit_method, "quasi-newton or nelder-mead");
    cmd_fit->add_option("--start", fit_starts, "start values (natural scale)");
    cmd_fit->add_option("--max-evals", fit_max_evals, "objective evaluation cap");
    cmd_fit->add_flag("--no-hessian", fit_no_hessian, "skip the Hessian");
    cmd_fit->add_flag("--keep-first-transaction", fit_keep_first,
                      "gg: include every customer's first transaction");
    cmd_fit->add_option("--output", fit_out, "model JSON path")->required();
    cmd_fit->add_option("--summary", fit_summary_out, "write the text summary here too");

    // ---- predict ----
    auto* cmd_pred = app.add_subcommand("predict", "per-customer prediction table");
    DatasetArgs pred_ds;
    pred_ds.attach(cmd_pred);
    CovariateArgs pred_cov;
    pred_cov.attach(cmd_pred);
    std::string pred_model, pred_spending, pred_out, pred_horizon_date;
    double pred_horizon = -1.0, pred_discount = 0.10;
    cmd_pred->add_option("--model", pred_model, "attrition model JSON")->required();
    cmd_pred->add_option("--spending-model", pred_spending, "gamma-gamma model JSON");
    cmd_pred->add_option("--horizon", pred_horizon, "prediction horizon in time units");
    cmd_pred->add_option("--horizon-date", pred_horizon_date, "prediction end date");
    cmd_pred->add_option("--discount-annual", pred_discount, "annual discount rate");
    cmd_pred->add_option("--output", pred_out, "output CSV (default stdout)");

    // ---- diagnose ----
    auto* cmd_diag = app.add_subcommand("diagnose", "model diagnostic series (plot data)");
    DatasetArgs diag_ds;
    diag_ds.attach(cmd_diag);
    CovariateArgs diag_cov;
    diag_cov.attach(cmd_diag);
    std::vector<std::string> diag_models;
    std::string diag_which = "tracking", diag_out;
    bool diag_cumulative = false;
    int diag_pmf_max = 10;
    int diag_spend_points = 200;
    cmd_diag->add_option("--model", diag_models, "model JSON (repeat to overlay)")
        ->required();
    cmd_diag->add_option("--which", diag_which, "tracking|pmf|spending");
    cmd_diag->add_flag("--cumulative", diag_cumulative, "cumulative tracking variant");
    cmd_diag->add_option("--pmf-max", diag_pmf_max, "largest PMF bin before the remainder");
    cmd_diag->add_option("--spending-points", diag_spend_points, "density grid size");
    cmd_diag->add_option("--output", diag_out, "output CSV (default stdout)");

    // ---- simulate ----
    auto* cmd_sim = app.add_subcommand("simulate", "draw a synthetic cohort");
    std::string sim_scenario, sim_out, sim_truth_out;
    cmd_sim->add_option("--scenario", sim_scenario, "scenario JSON path")->required();
    cmd_sim->add_option("--output", sim_out, "transaction CSV path")->required();
    cmd_sim->add_option("--truth", sim_truth_out, "latent truth CSV path");

    // ---- bootstrap ----
    auto* cmd_boot = app.add_subcommand("bootstrap", "resampling confidence intervals");
    DatasetArgs boot_ds;
    boot_ds.attach(cmd_boot);
    CovariateArgs boot_cov;
    boot_cov.attach(cmd_boot);
    std::string boot_model, boot_out, boot_functional = "params";
    int boot_n = 100;
    std::uint64_t boot_seed = 1;
    std::vector<double> boot_quantiles{0.05, 0.95};
    cmd_boot->add_option("--model", boot_model, "model JSON")->required();
    cmd_boot->add_option("--num-boots", boot_n, "number of bootstrap samples");
    cmd_boot->add_option("--seed", boot_seed, "resampling seed");
    cmd_boot->add_option("--quantiles", boot_quantiles, "two quantiles inside (0,1)");
    cmd_boot->add_option("--functional", boot_functional, "params or tracking");
    cmd_boot->add_option("--output", boot_out, "output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) set_max_threads(threads);

    if (cmd_sum->parsed()) {
        emit_summary(summarize(sum_ds.load()), sum_out, sum_json);
        return 0;
    }

    if (cmd_series->parsed()) {
        ClvDataset ds = ser_ds.load();
        SeriesKind kind;
        if (ser_which == "tracking") kind = SeriesKind::tracking;
        else if (ser_which == "frequency") kind = SeriesKind::frequency;
        else if (ser_which == "spending") kind = SeriesKind::spending;
        else if (ser_which == "interpurchasetime") kind = SeriesKind::interpurchasetime;
        else if (ser_which == "timings") kind = SeriesKind::timings;
        else throw UsageError("unknown series '" + ser_which + "'");
        SeriesOptions so;
        so.sample = ser_sample == "estimation" ? Sample::estimation
                    : ser_sample == "holdout"  ? Sample::holdout
                                               : Sample::full;
        so.mean_spending = !ser_all_values;
        so.ids = ser_ids;
        so.random_ids = ser_random;
        so.seed = ser_seed;
        write_table(descriptive_series(ds, kind, so), ser_out);
        return 0;
    }

    if (cmd_subset->parsed()) {
        ClvDataset ds = sub_ds.load();
        const Sample sample = sub_sample == "estimation" ? Sample::estimation
                              : sub_sample == "holdout"  ? Sample::holdout
                                                         : Sample::full;
        write_table(subset(ds, SubsetFilter::parse(sub_where), sample, sub_ds.date_format),
                    sub_out);
        return 0;
    }

    if (cmd_fit->parsed()) {
        ClvDataset ds = fit_ds.load();
        ds = attach_from_args(std::move(ds), fit_cov, fit_ds.id_col, fit_ds.date_format);
        OptimizerConfig cfg;
        cfg.max_evals = fit_max_evals;
        if (!fit_method.empty()) {
            if (fit_method == "quasi-newton") cfg.method = OptimizerConfig::Method::quasi_newton;
            else if (fit_method == "nelder-mead")
                cfg.method = OptimizerConfig::Method::nelder_mead;
            else throw UsageError("unknown method '" + fit_method + "'");
        }
        if (fit_no_hessian) cfg.compute_hessian = false;
        if (!fit_starts.empty()) cfg.start_values = fit_starts;
        FitResult fr;
        if (fit_family == "gg") {
            fr = fit_gg(ds, !fit_keep_first, cfg);
        } else if (fit_family == "pnbd") {
            ModelOptions opts;
            opts.use_correlation = fit_correlation;
            if (reg_trans >= 0.0 || reg_life >= 0.0)
                opts.reg_lambdas = {std::max(0.0, reg_trans), std::max(0.0, reg_life)};
            opts.constrained_names = fit_constraints;
            const bool dynamic =
                ds.cov_trans && ds.cov_trans->mode == CovariateTable::Mode::dynamic_cov;
            fr = dynamic ? fit_pnbd_dynamic(ds, opts, cfg) : fit_pnbd(ds, opts, cfg);
        } else {
            throw UsageError("unknown family '" + fit_family + "' (use pnbd or gg)");
        }
        {
            std::ofstream out(fit_out);
            if (!out) throw InputError("cannot write model file '" + fit_out + "'");
            out << fit_to_json(fr) << "\n";
        }
        const std::string text = summary_text(fr);
        std::cout << text;
        if (!fit_summary_out.empty()) {
            std::ofstream out(fit_summary_out);
            out << text;
        }
        return fr.converged ? 0 : 2;
    }

    if (cmd_pred->parsed()) {
        FitResult fit = load_model(pred_model);
        ClvDataset ds = pred_ds.load();
        ds = attach_from_args(std::move(ds), pred_cov, pred_ds.id_col, pred_ds.date_format);
        std::optional<FitResult> spending;
        if (!pred_spending.empty()) spending = load_model(pred_spending);
        PredictOptions opt;
        if (pred_horizon >= 0.0) opt.horizon_units = pred_horizon;
        if (!pred_horizon_date.empty())
            opt.horizon_date = parse_date(pred_horizon_date, pred_ds.date_format);
        opt.discount.annual_rate = pred_discount;
        auto rows = predict_table(fit, ds, spending, opt);
        const bool with_actuals = !rows.empty() && rows.front().actual_x.has_value();
        Table t = prediction_table_to_table(rows, fit.family, spending.has_value(),
                                            with_actuals);
        std::cerr << "discount: annual " << pred_discount << " -> per-" << ds.time_unit.name()
                  << " " << fmtnum(opt.discount.per_unit(ds.time_unit)) << "\n";
        write_table(t, pred_out);
        return 0;
    }

    if (cmd_diag->parsed()) {
        ClvDataset ds = diag_ds.load();
        ds = attach_from_args(std::move(ds), diag_cov, diag_ds.id_col, diag_ds.date_format);
        std::vector<FitResult> fits;
        for (const auto& m : diag_models) fits.push_back(load_model(m));
        Table t;
        if (diag_which == "tracking") {
            SeriesOptions so;
            Table actual = descriptive_series(ds, SeriesKind::tracking, so);
            const int n_periods = static_cast<int>(actual.rows.size()) - 1;
            t.header = {"period", "period_until", "actual"};
            for (std::size_t m = 0; m < fits.size(); ++m)
                t.header.push_back("expected" + (fits.size() > 1 ? std::to_string(m + 1)
                                                                 : std::string()));
            std::vector<std::vector<double>> exp_cols;
            for (const auto& f : fits) exp_cols.push_back(expected_tracking(f, ds, n_periods));
            double run_a = 0.0;
            std::vector<double> run_e(fits.size(), 0.0);
            for (int k = 0; k <= n_periods; ++k) {
                std::vector<std::string> row{actual.rows[k][0], actual.rows[k][1]};
                const double a = std::stod(actual.rows[k][2]);
                run_a += a;
                row.push_back(fmtnum(diag_cumulative ? run_a : a));
                for (std::size_t m = 0; m < fits.size(); ++m) {
                    run_e[m] += exp_cols[m][k];
                    row.push_back(fmtnum(diag_cumulative ? run_e[m] : exp_cols[m][k]));
                }
                t.rows.push_back(std::move(row));
            }
        } else if (diag_which == "pmf") {
            for (const auto& f : fits)
                if (f.family == "pnbd-dynamic")
                    throw CapabilityError(
                        "PMF diagnostics are not available for dynamic-covariate models");
            t.header = {"x", "actual"};
            for (std::size_t m = 0; m < fits.size(); ++m)
                t.header.push_back("expected" + (fits.size() > 1 ? std::to_string(m + 1)
                                                                 : std::string()));
            std::vector<std::int64_t> actual_hist(diag_pmf_max + 1, 0);
            std::int64_t actual_rest = 0;
            for (const auto& cs : ds.summaries) {
                if (cs.x <= diag_pmf_max) actual_hist[cs.x]++;
                else ++actual_rest;
            }
            std::vector<std::vector<double>> expected(fits.size(),
                                                      std::vector<double>(diag_pmf_max + 2, 0.0));
            for (std::size_t m = 0; m < fits.size(); ++m) {
                const PnbdParams params = fits[m].pnbd_params();
                const bool static_cov = fits[m].family == "pnbd-static";
                for (const auto& cs : ds.summaries) {
                    std::vector<double> ct, cl;
                    if (static_cov) {
                        ct = static_cov_row(ds, cs.customer_id, true);
                        cl = static_cov_row(ds, cs.customer_id, false);
                    }
                    const auto row = pnbd_pmf_row(params, cs.big_t, diag_pmf_max, ct, cl);
                    double total = 0.0;
                    for (int k = 0; k <= diag_pmf_max; ++k) {
                        expected[m][k] += row[k];
                        total += row[k];
                    }
                    expected[m][diag_pmf_max + 1] += 1.0 - total;  // remainder bin
                }
            }
            for (int k = 0; k <= diag_pmf_max; ++k) {
                std::vector<std::string> row{std::to_string(k),
                                             std::to_string(actual_hist[k])};
                for (std::size_t m = 0; m < fits.size(); ++m)
                    row.push_back(fmtnum(expected[m][k]));
                t.rows.push_back(std::move(row));
            }
            std::vector<std::string> rest{">" + std::to_string(diag_pmf_max),
                                          std::to_string(actual_rest)};
            for (std::size_t m = 0; m < fits.size(); ++m)
                rest.push_back(fmtnum(expected[m][diag_pmf_max + 1]));
            t.rows.push_back(std::move(rest));
        } else if (diag_which == "spending") {
            if (!ds.has_prices) throw CapabilityError("spending diagnostics need prices");
            t.header = {"z"};
            for (std::size_t m = 0; m < fits.size(); ++m)
                t.header.push_back("density" + (fits.size() > 1 ? std::to_string(m + 1)
                                                                : std::string()));
            double zmax = 0.0;
            std::vector<SpendingObservation> obs;
            for (const auto& f : fits) {
                if (f.family != "gg")
                    throw CapabilityError("spending diagnostics need gamma-gamma models");
            }
            obs = spending_inputs(ds, fits.front().remove_first_transaction);
            for (const auto& o : obs) zmax = std::max(zmax, o.zbar);
            zmax *= 1.05;
            for (int g = 1; g <= diag_spend_points; ++g) {
                const double z = zmax * g / diag_spend_points;
                std::vector<std::string> row{fmtnum(z)};
                for (const auto& f : fits) {
                    const GgParams gp = f.gg_params();
                    double dens = 0.0;
                    for (const auto& o : obs)
                        dens += std::exp(gg_log_density(gp, {o.x_s, z}));
                    row.push_back(fmtnum(dens / obs.size()));
                }
                t.rows.push_back(std::move(row));
            }
        } else {
            throw UsageError("unknown diagnostic '" + diag_which + "'");
        }
        write_table(t, diag_out);
        return 0;
    }

    if (cmd_sim->parsed()) {
        std::ifstream in(sim_scenario);
        if (!in) throw InputError("cannot open scenario '" + sim_scenario + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        SimResult sim = simulate_pnbd(scenario_from_json(buf.str()));
        CsvTable log;
        log.header = {"Id", "Date", "Price"};
        for (const auto& r : sim.log)
            log.rows.push_back({r.customer_id, format_date(r.date),
                                r.price ? fmtnum(*r.price) : std::string()});
        write_csv_file(sim_out, log);
        if (!sim_truth_out.empty()) {
            CsvTable truth;
            truth.header = {"Id", "lambda0", "mu0", "omega", "alive_at_estimation_end",
                            "covariate"};
            for (const auto& tr : sim.truth)
                truth.rows.push_back({tr.id, fmtnum(tr.lambda0), fmtnum(tr.mu0),
                                      fmtnum(tr.omega),
                                      tr.alive_at_estimation_end ? "1" : "0",
                                      fmtnum(tr.covariate)});
            write_csv_file(sim_truth_out, truth);
        }
        return 0;
    }

    if (cmd_boot->parsed()) {
        FitResult fit = load_model(boot_model);
        ClvDataset ds = boot_ds.load();
        ds = attach_from_args(std::move(ds), boot_cov, boot_ds.id_col, boot_ds.date_format);
        if (boot_quantiles.size() != 2) throw UsageError("exactly two quantiles required");
        BootstrapSpec spec;
        spec.num_boots = boot_n;
        spec.seed = boot_seed;
        spec.quantiles = {boot_quantiles[0], boot_quantiles[1]};
        Table t;
        if (boot_functional == "params") {
            auto outcome =
                bootstrap_apply(fit, ds, spec, [](const FitResult& fr, const ClvDataset&) {
                    return fr.params;
                });
            auto rows = ci_table(outcome.outputs, spec.quantiles);
            t.header = {"parameter", "estimate", "lower", "upper"};
            for (std::size_t i = 0; i < rows.size(); ++i)
                t.rows.push_back({fit.param_names[i], fmtnum(fit.params[i]),
                                  fmtnum(rows[i].lower), fmtnum(rows[i].upper)});
            std::cerr << "bootstrap: " << outcome.outputs.size() << " successes, "
                      << outcome.n_failed << " failures\n";
        } else if (boot_functional == "tracking") {
            SeriesOptions so;
            Table actual = descriptive_series(ds, SeriesKind::tracking, so);
            const int n_periods = static_cast<int>(actual.rows.size()) - 1;
            auto outcome = bootstrap_apply(
                fit, ds, spec, [&](const FitResult& fr, const ClvDataset& bds) {
                    return expected_tracking(fr, bds, n_periods);
                });
            auto rows = ci_table(outcome.outputs, spec.quantiles);
            const auto point = expected_tracking(fit, ds, n_periods);
            t.header = {"period", "expected", "lower", "upper"};
            for (int k = 0; k <= n_periods; ++k)
                t.rows.push_back({std::to_string(k), fmtnum(point[k]),
                                  fmtnum(rows[k].lower), fmtnum(rows[k].upper)});
            std::cerr << "bootstrap: " << outcome.outputs.size() << " successes, "
                      << outcome.n_failed << " failures\n";
        } else {
            throw UsageError("unknown functional '" + boot_functional + "'");
        }
        write_table(t, boot_out);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
