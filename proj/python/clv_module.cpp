// Python bindings for the main operations: simulate, ingest, fit, predict,
// diagnose-style series, and bootstrap.
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "clv/bootstrap.hpp"
#include "clv/errors.hpp"
#include "clv/estimation.hpp"
#include "clv/prediction.hpp"
#include "clv/simulation.hpp"

namespace py = pybind11;
using namespace clv;

namespace {

ClvDataset ingest_py(const std::vector<std::tuple<std::string, std::string, py::object>>& rows,
                     const std::string& date_format, const std::string& time_unit,
                     py::object split, py::object data_end, bool keep_seconds) {
    std::vector<TransactionRecord> records;
    records.reserve(rows.size());
    for (const auto& [id, date, price] : rows) {
        TransactionRecord r;
        r.customer_id = id;
        r.date = parse_date(date, date_format);
        if (!price.is_none()) r.price = price.cast<double>();
        records.push_back(std::move(r));
    }
    IngestOptions opt;
    opt.time_unit = TimeUnit::parse(time_unit);
    opt.second_resolution = keep_seconds;
    if (!split.is_none()) {
        if (py::isinstance<py::str>(split))
            opt.estimation_split = parse_date(split.cast<std::string>(), date_format);
        else
            opt.estimation_split = split.cast<double>();
    }
    if (!data_end.is_none())
        opt.data_end = parse_date(data_end.cast<std::string>(), date_format);
    return ingest(records, opt);
}

py::dict summary_py(const ClvDataset& ds) {
    const SummaryReport rep = summarize(ds);
    py::dict out;
    out["n_customers"] = rep.n_customers;
    out["time_unit"] = rep.time_unit_name;
    out["estimation_length"] = rep.estimation_length;
    out["holdout_length"] = rep.holdout_length;
    out["estimation_transactions"] = rep.estimation.n_transactions;
    out["total_transactions"] = rep.total.n_transactions;
    if (rep.estimation.zero_repeater_percent)
        out["zero_repeater_percent"] = *rep.estimation.zero_repeater_percent;
    if (rep.estimation.mean_interpurchase)
        out["mean_interpurchase"] = *rep.estimation.mean_interpurchase;
    return out;
}

py::dict fit_to_dict(const FitResult& fr) {
    py::dict out;
    py::dict params;
    for (std::size_t i = 0; i < fr.param_names.size(); ++i)
        params[py::str(fr.param_names[i])] = fr.params[i];
    out["family"] = fr.family;
    out["params"] = params;
    out["loglik"] = fr.loglik;
    out["aic"] = fr.aic;
    out["bic"] = fr.bic;
    out["converged"] = fr.converged;
    out["kkt1"] = fr.kkt1;
    out["kkt2"] = fr.kkt2;
    out["fevals"] = fr.fevals;
    out["optimizer"] = fr.optimizer;
    return out;
}

}  // namespace

PYBIND11_MODULE(_clv, m) {
    m.doc() = "probabilistic customer-base analysis (Pareto/NBD family + Gamma-Gamma)";

    py::register_exception<InputError>(m, "InputError");
    py::register_exception<UsageError>(m, "UsageError");
    py::register_exception<NumericalError>(m, "NumericalError");

    py::class_<ClvDataset>(m, "Dataset")
        .def_property_readonly("n_customers",
                               [](const ClvDataset& ds) { return ds.summaries.size(); })
        .def_property_readonly("estimation_length",
                               [](const ClvDataset& ds) { return ds.estimation_length; })
        .def_property_readonly("holdout_length",
                               [](const ClvDataset& ds) { return ds.holdout_length(); })
        .def("summary", &summary_py);

    py::class_<FitResult>(m, "FitResult")
        .def_property_readonly("family", [](const FitResult& fr) { return fr.family; })
        .def_property_readonly("loglik", [](const FitResult& fr) { return fr.loglik; })
        .def_property_readonly("converged", [](const FitResult& fr) { return fr.converged; })
        .def("param", &FitResult::param)
        .def("to_dict", &fit_to_dict)
        .def("to_json", &fit_to_json)
        .def("summary_text", &summary_text);

    m.def("ingest", &ingest_py, py::arg("rows"), py::arg("date_format") = "ymd",
          py::arg("time_unit") = "week", py::arg("split") = py::none(),
          py::arg("data_end") = py::none(), py::arg("keep_seconds") = false,
          "Build a dataset from (id, date, price-or-None) rows");

    m.def(
        "simulate",
        [](const std::string& scenario_json) {
            SimResult sim = simulate_pnbd(scenario_from_json(scenario_json));
            py::list log;
            for (const auto& r : sim.log) {
                py::object price = r.price ? py::cast(*r.price) : py::none();
                log.append(py::make_tuple(r.customer_id, format_date(r.date), price));
            }
            return py::make_tuple(std::move(sim.dataset), log);
        },
        py::arg("scenario_json"),
        "Simulate a cohort; returns (dataset, transaction rows)");

    m.def(
        "fit",
        [](const ClvDataset& ds, const std::string& family, bool correlation,
           py::object reg_lambdas, const std::vector<std::string>& constraints,
           bool remove_first_transaction, py::object method, bool hessian) {
            OptimizerConfig cfg;
            cfg.compute_hessian = hessian;
            if (!method.is_none()) {
                const std::string name = method.cast<std::string>();
                cfg.method = name == "nelder-mead" ? OptimizerConfig::Method::nelder_mead
                                                   : OptimizerConfig::Method::quasi_newton;
            }
            if (family == "gg") return fit_gg(ds, remove_first_transaction, cfg);
            ModelOptions opts;
            opts.use_correlation = correlation;
            if (!reg_lambdas.is_none()) {
                auto pair = reg_lambdas.cast<std::pair<double, double>>();
                opts.reg_lambdas = pair;
            }
            opts.constrained_names = constraints;
            const bool dynamic =
                ds.cov_trans && ds.cov_trans->mode == CovariateTable::Mode::dynamic_cov;
            return dynamic ? fit_pnbd_dynamic(ds, opts, cfg) : fit_pnbd(ds, opts, cfg);
        },
        py::arg("dataset"), py::arg("family") = "pnbd", py::arg("correlation") = false,
        py::arg("reg_lambdas") = py::none(),
        py::arg("constraints") = std::vector<std::string>{},
        py::arg("remove_first_transaction") = true, py::arg("method") = py::none(),
        py::arg("hessian") = true);

    m.def("fit_from_json", &fit_from_json);

    m.def(
        "predict",
        [](const FitResult& fit, const ClvDataset& ds, py::object spending,
           py::object horizon, double discount_annual) {
            PredictOptions opt;
            if (!horizon.is_none()) opt.horizon_units = horizon.cast<double>();
            opt.discount.annual_rate = discount_annual;
            std::optional<FitResult> sp;
            if (!spending.is_none()) sp = spending.cast<FitResult>();
            const auto rows = predict_table(fit, ds, sp, opt);
            py::list out;
            for (const auto& r : rows) {
                py::dict d;
                d["id"] = r.customer_id;
                d["palive"] = r.palive;
                d["cet"] = r.cet;
                d[fit.family == "pnbd-dynamic" ? "dect" : "dert"] = r.dert_or_dect;
                if (r.predicted_mean_spending) {
                    d["predicted_mean_spending"] = *r.predicted_mean_spending;
                    d["predicted_clv"] = *r.predicted_clv;
                }
                if (r.actual_x) d["actual_x"] = *r.actual_x;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("fit"), py::arg("dataset"), py::arg("spending") = py::none(),
        py::arg("horizon") = py::none(), py::arg("discount_annual") = 0.10);

    m.def(
        "bootstrap_params",
        [](const FitResult& fit, const ClvDataset& ds, int num_boots, std::uint64_t seed,
           std::pair<double, double> quantiles) {
            BootstrapSpec spec;
            spec.num_boots = num_boots;
            spec.seed = seed;
            spec.quantiles = quantiles;
            auto outcome = bootstrap_apply(
                fit, ds, spec,
                [](const FitResult& fr, const ClvDataset&) { return fr.params; });
            auto rows = ci_table(outcome.outputs, spec.quantiles);
            py::dict out;
            for (std::size_t i = 0; i < rows.size(); ++i)
                out[py::str(fit.param_names[i])] =
                    py::make_tuple(rows[i].lower, rows[i].upper);
            return out;
        },
        py::arg("fit"), py::arg("dataset"), py::arg("num_boots") = 100, py::arg("seed") = 1,
        py::arg("quantiles") = std::pair<double, double>{0.05, 0.95});

    m.def("discount_per_unit", [](double annual, const std::string& unit) {
        return discount_per_unit(annual, TimeUnit::parse(unit));
    });

    m.attr("__version__") = "0.1.0";
}
