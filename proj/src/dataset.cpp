#include "clv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "clv/csv.hpp"
#include "clv/errors.hpp"

namespace clv {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(15);
    os << v;
    return os.str();
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1));
}

}  // namespace

double TimeUnit::units_per_year() const {
    switch (kind) {
        case Kind::hour: return 8760.0;
        case Kind::day: return 365.0;
        case Kind::week: return 52.0;
        case Kind::year: return 1.0;
    }
    return 52.0;
}

double TimeUnit::seconds_per_unit() const {
    switch (kind) {
        case Kind::hour: return 3600.0;
        case Kind::day: return 86400.0;
        case Kind::week: return 7.0 * 86400.0;
        case Kind::year: return 365.0 * 86400.0;
    }
    return 7.0 * 86400.0;
}

std::string TimeUnit::name() const {
    switch (kind) {
        case Kind::hour: return "hour";
        case Kind::day: return "day";
        case Kind::week: return "week";
        case Kind::year: return "year";
    }
    return "week";
}

TimeUnit TimeUnit::parse(const std::string& text) {
    std::string t;
    for (char c : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (t == "hour" || t == "hours" || t == "h") return {Kind::hour};
    if (t == "day" || t == "days" || t == "d") return {Kind::day};
    if (t == "week" || t == "weeks" || t == "w") return {Kind::week};
    if (t == "year" || t == "years" || t == "y") return {Kind::year};
    throw InputError("unknown time unit '" + text + "'");
}

double ClvDataset::holdout_length() const {
    if (!holdout_end) return 0.0;
    return to_units(estimation_end, *holdout_end);
}

double ClvDataset::to_units(Timestamp from, Timestamp to) const {
    // exact rational day (or second) counts divided by the unit length
    return static_cast<double>(to - from) / time_unit.seconds_per_unit();
}

const CustomerSummary& ClvDataset::summary_for(const std::string& id) const {
    for (const auto& s : summaries)
        if (s.customer_id == id) return s;
    throw InputError("unknown customer id '" + id + "'");
}

ClvDataset ingest(const std::vector<TransactionRecord>& records, const IngestOptions& options) {
    if (records.empty()) throw InputError("transaction log is empty");

    ClvDataset ds;
    ds.time_unit = options.time_unit;

    // collapse to day (or second) granularity per customer
    std::map<std::pair<std::string, Timestamp>, std::optional<double>> merged;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.price && (!(*r.price >= 0.0) || !std::isfinite(*r.price)))
            throw InputError("negative or non-finite price in row " + std::to_string(i + 1) +
                             " (customer '" + r.customer_id + "')");
        const Timestamp t = (options.time_unit.day_granularity() && !options.second_resolution)
                                ? truncate_to_day(r.date)
                                : r.date;
        auto& slot = merged[{r.customer_id, t}];
        if (r.price) slot = slot.value_or(0.0) + *r.price;
    }

    ds.transactions.reserve(merged.size());
    Timestamp first_overall = std::numeric_limits<Timestamp>::max();
    Timestamp last_overall = std::numeric_limits<Timestamp>::min();
    for (const auto& [key, price] : merged) {
        ds.transactions.push_back({key.first, key.second, price});
        first_overall = std::min(first_overall, key.second);
        last_overall = std::max(last_overall, key.second);
        if (price) ds.has_prices = true;
    }
    std::sort(ds.transactions.begin(), ds.transactions.end(),
              [](const AggTransaction& a, const AggTransaction& b) {
                  return a.customer_id != b.customer_id ? a.customer_id < b.customer_id
                                                        : a.date < b.date;
              });

    Timestamp data_end = options.data_end.value_or(last_overall);
    if (data_end < last_overall)
        throw InputError("data end " + format_date(data_end) + " precedes last transaction " +
                         format_date(last_overall));

    ds.estimation_start = first_overall;
    if (options.estimation_split) {
        if (std::holds_alternative<double>(*options.estimation_split)) {
            const double units = std::get<double>(*options.estimation_split);
            if (units < 1.0)
                throw DomainError("estimation split must be at least one time unit");
            ds.estimation_end =
                first_overall +
                static_cast<Timestamp>(std::llround(units * options.time_unit.seconds_per_unit()));
        } else {
            ds.estimation_end = std::get<Timestamp>(*options.estimation_split);
        }
        if (ds.estimation_end > data_end)
            throw DomainError("estimation split " + format_date(ds.estimation_end) +
                              " lies beyond the data end " + format_date(data_end));
        ds.holdout_end = data_end;
        if (*ds.holdout_end == ds.estimation_end) ds.holdout_end.reset();
    } else {
        ds.estimation_end = data_end;
    }
    ds.estimation_length = ds.to_units(ds.estimation_start, ds.estimation_end);
    if (!(ds.estimation_length > 0.0))
        throw DomainError("estimation period has zero length");

    // per-customer summaries over the estimation period
    std::size_t i = 0;
    while (i < ds.transactions.size()) {
        std::size_t j = i;
        while (j < ds.transactions.size() &&
               ds.transactions[j].customer_id == ds.transactions[i].customer_id)
            ++j;
        const Timestamp first = ds.transactions[i].date;
        if (first <= ds.estimation_end) {
            CustomerSummary cs;
            cs.customer_id = ds.transactions[i].customer_id;
            cs.first_date = first;
            Timestamp last_in_est = first;
            int count = 0;
            double spend = 0.0;
            int spend_n = 0;
            for (std::size_t k = i; k < j; ++k) {
                if (ds.transactions[k].date > ds.estimation_end) break;
                ++count;
                last_in_est = ds.transactions[k].date;
                if (ds.transactions[k].price) {
                    spend += *ds.transactions[k].price;
                    ++spend_n;
                }
            }
            cs.x = count - 1;
            cs.t_x = ds.to_units(first, last_in_est);
            cs.big_t = ds.to_units(first, ds.estimation_end);
            if (spend_n > 0) cs.mean_spending = spend / spend_n;
            ds.summaries.push_back(std::move(cs));
        }
        // customers first seen in the holdout period carry no summary
        i = j;
    }
    if (ds.summaries.empty())
        throw InputError("no customer has a transaction inside the estimation period");
    return ds;
}

std::vector<TransactionRecord> records_from_csv(const std::string& path,
                                                const std::string& date_format,
                                                const std::string& id_col,
                                                const std::string& date_col,
                                                const std::string& price_col) {
    const CsvTable t = read_csv_file(path);
    const int ci = t.require_column(id_col);
    const int cd = t.require_column(date_col);
    const int cp = t.column(price_col);
    std::vector<TransactionRecord> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        TransactionRecord rec;
        rec.customer_id = t.rows[r][ci];
        try {
            rec.date = parse_date(t.rows[r][cd], date_format);
        } catch (const InputError& e) {
            throw InputError("row " + std::to_string(r + 2) + ": " + e.what());
        }
        if (cp >= 0 && !t.rows[r][cp].empty()) {
            try {
                rec.price = std::stod(t.rows[r][cp]);
            } catch (...) {
                throw InputError("row " + std::to_string(r + 2) + ": bad price '" +
                                 t.rows[r][cp] + "'");
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

namespace {

PeriodStats window_stats(const ClvDataset& ds, Timestamp start, Timestamp end,
                         bool zero_repeater_block) {
    PeriodStats st;
    st.present = true;
    st.start = start;
    st.end = end;

    std::unordered_map<std::string, std::int64_t> per_customer;
    std::unordered_map<std::string, std::vector<Timestamp>> times;
    std::vector<double> prices;
    double total_spend = 0.0;
    bool any_price = false;
    for (const auto& tr : ds.transactions) {
        if (tr.date < start || tr.date > end) continue;
        ++st.n_transactions;
        per_customer[tr.customer_id]++;
        times[tr.customer_id].push_back(tr.date);
        if (!st.first_transaction || tr.date < *st.first_transaction)
            st.first_transaction = tr.date;
        if (!st.last_transaction || tr.date > *st.last_transaction)
            st.last_transaction = tr.date;
        if (tr.price) {
            prices.push_back(*tr.price);
            total_spend += *tr.price;
            any_price = true;
        }
    }
    std::vector<double> counts;
    counts.reserve(per_customer.size());
    for (const auto& [id, c] : per_customer) counts.push_back(static_cast<double>(c));
    st.mean_transactions = mean_of(counts);
    st.sd_transactions = sd_of(counts);
    if (any_price) {
        st.mean_spending = mean_of(prices);
        st.sd_spending = sd_of(prices);
        st.total_spending = total_spend;
    }
    std::vector<double> gaps;
    for (auto& [id, tv] : times) {
        if (tv.size() < 2) continue;
        std::sort(tv.begin(), tv.end());
        double g = 0.0;
        for (std::size_t k = 1; k < tv.size(); ++k) g += ds.to_units(tv[k - 1], tv[k]);
        gaps.push_back(g / (tv.size() - 1));
    }
    if (!gaps.empty()) {
        st.mean_interpurchase = mean_of(gaps);
        st.sd_interpurchase = sd_of(gaps);
    }
    if (zero_repeater_block) {
        std::int64_t zeros = 0;
        for (const auto& s : ds.summaries)
            if (s.x == 0) ++zeros;
        st.zero_repeaters = zeros;
        st.zero_repeater_percent =
            100.0 * static_cast<double>(zeros) / static_cast<double>(ds.summaries.size());
    }
    return st;
}

}  // namespace

SummaryReport summarize(const ClvDataset& ds) {
    SummaryReport rep;
    rep.time_unit_name = ds.time_unit.name();
    rep.estimation_length = ds.estimation_length;
    rep.holdout_length = ds.holdout_length();
    rep.n_customers = static_cast<std::int64_t>(ds.summaries.size());
    rep.estimation = window_stats(ds, ds.estimation_start, ds.estimation_end, true);
    if (ds.holdout_end) {
        rep.holdout = window_stats(ds, ds.estimation_end + 1, *ds.holdout_end, false);
        rep.total = window_stats(ds, ds.estimation_start, *ds.holdout_end, false);
    } else {
        rep.total = window_stats(ds, ds.estimation_start, ds.estimation_end, false);
    }
    return rep;
}

namespace {

std::pair<Timestamp, Timestamp> sample_window(const ClvDataset& ds, Sample sample) {
    switch (sample) {
        case Sample::estimation: return {ds.estimation_start, ds.estimation_end};
        case Sample::holdout:
            if (!ds.holdout_end) return {1, 0};  // empty window
            return {ds.estimation_end + 1, *ds.holdout_end};
        case Sample::full:
            return {ds.estimation_start, ds.holdout_end.value_or(ds.estimation_end)};
    }
    return {ds.estimation_start, ds.estimation_end};
}

}  // namespace

Table descriptive_series(const ClvDataset& ds, SeriesKind which, const SeriesOptions& options) {
    Table out;
    const auto [wstart, wend] = sample_window(ds, options.sample);

    switch (which) {
        case SeriesKind::tracking: {
            // period k covers (start+(k-1)u, start+k u]; period 0 is the start
            // instant and is zero by definition
            out.header = {"period", "period_until", "repeat_transactions"};
            const double total_units = ds.to_units(ds.estimation_start, wend);
            const int n_periods = static_cast<int>(std::ceil(total_units - 1e-9));
            std::vector<std::int64_t> counts(n_periods + 1, 0);
            std::unordered_map<std::string, Timestamp> first_date;
            for (const auto& s : ds.summaries) first_date[s.customer_id] = s.first_date;
            for (const auto& tr : ds.transactions) {
                if (tr.date > wend) continue;
                auto it = first_date.find(tr.customer_id);
                if (it == first_date.end() || tr.date <= it->second) continue;  // first purchase
                const double u = ds.to_units(ds.estimation_start, tr.date);
                int k = static_cast<int>(std::ceil(u - 1e-9));
                if (k < 1) k = 1;
                if (k <= n_periods) ++counts[k];
            }
            for (int k = 0; k <= n_periods; ++k) {
                const Timestamp until =
                    ds.estimation_start +
                    static_cast<Timestamp>(std::llround(k * ds.time_unit.seconds_per_unit()));
                out.rows.push_back({std::to_string(k), format_date(until),
                                    std::to_string(counts[k])});
            }
            break;
        }
        case SeriesKind::frequency: {
            out.header = {"x", "customers"};
            std::map<int, std::int64_t> hist;
            for (const auto& s : ds.summaries) hist[s.x]++;
            for (const auto& [x, n] : hist)
                out.rows.push_back({std::to_string(x), std::to_string(n)});
            break;
        }
        case SeriesKind::spending: {
            if (!ds.has_prices)
                throw CapabilityError("spending series requires price data");
            if (options.mean_spending) {
                out.header = {"customer_id", "mean_spending"};
                std::unordered_map<std::string, std::pair<double, int>> acc;
                for (const auto& tr : ds.transactions) {
                    if (tr.date < wstart || tr.date > wend || !tr.price) continue;
                    auto& slot = acc[tr.customer_id];
                    slot.first += *tr.price;
                    slot.second += 1;
                }
                std::vector<std::string> ids;
                for (const auto& [id, v] : acc) ids.push_back(id);
                std::sort(ids.begin(), ids.end());
                for (const auto& id : ids) {
                    const auto& v = acc[id];
                    out.rows.push_back({id, fmt(v.first / v.second)});
                }
            } else {
                out.header = {"customer_id", "spending"};
                for (const auto& tr : ds.transactions)
                    if (tr.date >= wstart && tr.date <= wend && tr.price)
                        out.rows.push_back({tr.customer_id, fmt(*tr.price)});
            }
            break;
        }
        case SeriesKind::interpurchasetime: {
            out.header = {"customer_id", "mean_interpurchase_time"};
            std::unordered_map<std::string, std::vector<Timestamp>> times;
            for (const auto& tr : ds.transactions)
                if (tr.date >= wstart && tr.date <= wend)
                    times[tr.customer_id].push_back(tr.date);
            std::vector<std::string> ids;
            for (const auto& [id, tv] : times)
                if (tv.size() >= 2) ids.push_back(id);
            std::sort(ids.begin(), ids.end());
            for (const auto& id : ids) {
                auto& tv = times[id];
                std::sort(tv.begin(), tv.end());
                double g = 0.0;
                for (std::size_t k = 1; k < tv.size(); ++k)
                    g += ds.to_units(tv[k - 1], tv[k]);
                out.rows.push_back({id, fmt(g / (tv.size() - 1))});
            }
            break;
        }
        case SeriesKind::timings: {
            out.header = {"customer_id", "time_units", "date"};
            std::set<std::string> wanted(options.ids.begin(), options.ids.end());
            if (wanted.empty() && options.random_ids > 0) {
                std::vector<std::string> all;
                for (const auto& s : ds.summaries) all.push_back(s.customer_id);
                std::mt19937_64 rng(options.seed);
                std::shuffle(all.begin(), all.end(), rng);
                const std::size_t n =
                    std::min<std::size_t>(all.size(), static_cast<std::size_t>(options.random_ids));
                wanted.insert(all.begin(), all.begin() + n);
            }
            for (const auto& tr : ds.transactions) {
                if (tr.date < wstart || tr.date > wend) continue;
                if (!wanted.empty() && wanted.count(tr.customer_id) == 0) continue;
                out.rows.push_back({tr.customer_id,
                                    fmt(ds.to_units(ds.estimation_start, tr.date)),
                                    format_date(tr.date)});
            }
            break;
        }
    }
    return out;
}

CovariateTable CovariateTable::from_columns(Mode mode, const std::vector<std::string>& names,
                                            const std::vector<std::string>& ids,
                                            const std::vector<Timestamp>& dates,
                                            const std::vector<std::vector<std::string>>& columns) {
    if (columns.size() != names.size())
        throw InputError("covariate column count does not match name count");
    const std::size_t nrow = ids.size();
    for (const auto& col : columns)
        if (col.size() != nrow) throw InputError("covariate columns have uneven lengths");

    // detect categorical columns and expand to k-1 indicators
    std::vector<std::string> out_names;
    std::vector<std::vector<double>> out_cols;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        bool numeric = true;
        std::vector<double> parsed(nrow);
        for (std::size_t r = 0; r < nrow; ++r) {
            try {
                std::size_t pos = 0;
                parsed[r] = std::stod(columns[c][r], &pos);
                if (pos != columns[c][r].size()) { numeric = false; break; }
            } catch (...) {
                numeric = false;
                break;
            }
        }
        if (numeric) {
            out_names.push_back(names[c]);
            out_cols.push_back(std::move(parsed));
        } else {
            std::set<std::string> levels(columns[c].begin(), columns[c].end());
            if (levels.size() < 2)
                throw InputError("categorical covariate '" + names[c] + "' has a single level");
            auto it = levels.begin();
            ++it;  // first level is the baseline
            for (; it != levels.end(); ++it) {
                out_names.push_back(names[c] + "_" + *it);
                std::vector<double> col(nrow, 0.0);
                for (std::size_t r = 0; r < nrow; ++r)
                    if (columns[c][r] == *it) col[r] = 1.0;
                out_cols.push_back(std::move(col));
            }
        }
    }

    CovariateTable table;
    table.mode = mode;
    table.names = out_names;
    if (mode == Mode::static_cov) {
        for (std::size_t r = 0; r < nrow; ++r) {
            std::vector<double> row(out_cols.size());
            for (std::size_t c = 0; c < out_cols.size(); ++c) row[c] = out_cols[c][r];
            auto [it, inserted] = table.static_rows.emplace(ids[r], std::move(row));
            if (!inserted)
                throw InputError("duplicate static covariate row for customer '" + ids[r] + "'");
        }
    } else {
        if (dates.size() != nrow)
            throw InputError("dynamic covariates need a date per row");
        for (std::size_t r = 0; r < nrow; ++r) {
            auto& dyn = table.dynamic_rows[ids[r]];
            dyn.starts.push_back(dates[r]);
            std::vector<double> row(out_cols.size());
            for (std::size_t c = 0; c < out_cols.size(); ++c) row[c] = out_cols[c][r];
            dyn.values.push_back(std::move(row));
        }
        for (auto& [id, dyn] : table.dynamic_rows) {
            std::vector<std::size_t> idx(dyn.starts.size());
            for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                return dyn.starts[a] < dyn.starts[b];
            });
            DynRow sorted;
            for (std::size_t k : idx) {
                sorted.starts.push_back(dyn.starts[k]);
                sorted.values.push_back(std::move(dyn.values[k]));
            }
            dyn = std::move(sorted);
        }
    }
    return table;
}

namespace {

void validate_covariates(const ClvDataset& ds, const CovariateTable& table,
                         const std::string& which) {
    if (table.mode == CovariateTable::Mode::static_cov) {
        for (const auto& s : ds.summaries) {
            if (table.static_rows.find(s.customer_id) == table.static_rows.end())
                throw InputError(which + " covariates: missing row for customer '" +
                                 s.customer_id + "'");
        }
        for (const auto& [id, row] : table.static_rows)
            if (std::none_of(ds.summaries.begin(), ds.summaries.end(),
                             [&](const CustomerSummary& s) { return s.customer_id == id; }))
                throw InputError(which + " covariates: unknown customer id '" + id + "'");
    } else {
        const double spu = ds.time_unit.seconds_per_unit();
        for (const auto& s : ds.summaries) {
            auto it = table.dynamic_rows.find(s.customer_id);
            if (it == table.dynamic_rows.end())
                throw InputError(which + " covariates: missing rows for customer '" +
                                 s.customer_id + "'");
            const auto& dyn = it->second;
            if (dyn.starts.front() > ds.estimation_start)
                throw CoverageError(which + " covariates for customer '" + s.customer_id +
                                    "' start after the estimation period begins (" +
                                    format_date(dyn.starts.front()) + ")");
            for (std::size_t k = 1; k < dyn.starts.size(); ++k) {
                const Timestamp expect =
                    dyn.starts[k - 1] + static_cast<Timestamp>(std::llround(spu));
                if (dyn.starts[k] != expect)
                    throw CoverageError(which + " covariates for customer '" + s.customer_id +
                                        "' have a gap: expected interval starting " +
                                        format_date(expect) + ", found " +
                                        format_date(dyn.starts[k]));
            }
            const Timestamp cover_end =
                dyn.starts.back() + static_cast<Timestamp>(std::llround(spu));
            if (cover_end < ds.estimation_end)
                throw CoverageError(which + " covariates for customer '" + s.customer_id +
                                    "' end " + format_date(cover_end) +
                                    ", before the estimation end " +
                                    format_date(ds.estimation_end));
            // alignment to the cohort start
            const double offset_units = ds.to_units(ds.estimation_start, dyn.starts.front());
            if (std::fabs(offset_units - std::round(offset_units)) > 1e-9)
                throw CoverageError(which + " covariates for customer '" + s.customer_id +
                                    "' are not aligned to the period start");
        }
    }
}

}  // namespace

ClvDataset attach_covariates(const ClvDataset& ds, CovariateTable life, CovariateTable trans) {
    if (life.mode != trans.mode)
        throw InputError("attrition and transaction covariates must share the same mode");
    validate_covariates(ds, life, "attrition");
    validate_covariates(ds, trans, "transaction");
    ClvDataset out = ds;
    out.cov_life = std::move(life);
    out.cov_trans = std::move(trans);
    return out;
}

SubsetFilter SubsetFilter::parse(const std::string& expr) {
    SubsetFilter f;
    std::size_t pos = 0;
    while (pos < expr.size()) {
        std::size_t amp = expr.find('&', pos);
        std::string part = expr.substr(pos, amp == std::string::npos ? amp : amp - pos);
        pos = (amp == std::string::npos) ? expr.size() : amp + 1;
        // trim
        const auto b = part.find_first_not_of(" \t");
        const auto e = part.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        part = part.substr(b, e - b + 1);

        static const char* ops[] = {"<=", ">=", "==", "!=", "<", ">", "="};
        std::size_t op_pos = std::string::npos;
        std::string op;
        for (const char* o : ops) {
            const auto p = part.find(o);
            if (p != std::string::npos && (op_pos == std::string::npos || p < op_pos)) {
                op_pos = p;
                op = o;
            }
        }
        if (op_pos == std::string::npos)
            throw InputError("cannot parse filter clause '" + part + "'");
        std::string field = part.substr(0, op_pos);
        std::string value = part.substr(op_pos + op.size());
        auto trim = [](std::string s) {
            const auto b2 = s.find_first_not_of(" \t\"");
            const auto e2 = s.find_last_not_of(" \t\"");
            return b2 == std::string::npos ? std::string() : s.substr(b2, e2 - b2 + 1);
        };
        field = trim(field);
        value = trim(value);
        std::string lower;
        for (char c : field)
            lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lower != "id" && lower != "date" && lower != "price")
            throw InputError("unknown filter column '" + field + "' (use Id, Date or Price)");
        if (op == "=") op = "==";
        f.clauses.push_back({lower, op, value});
    }
    return f;
}

namespace {

bool compare_double(double a, const std::string& op, double b) {
    if (op == "==") return a == b;
    if (op == "!=") return a != b;
    if (op == "<=") return a <= b;
    if (op == ">=") return a >= b;
    if (op == "<") return a < b;
    return a > b;
}

bool compare_string(const std::string& a, const std::string& op, const std::string& b) {
    if (op == "==") return a == b;
    if (op == "!=") return a != b;
    if (op == "<=") return a <= b;
    if (op == ">=") return a >= b;
    if (op == "<") return a < b;
    return a > b;
}

}  // namespace

Table subset(const ClvDataset& ds, const SubsetFilter& filter, Sample sample,
             const std::string& date_format) {
    Table out;
    out.header = {"Id", "Date", "Price"};
    const auto [wstart, wend] = sample_window(ds, sample);
    for (const auto& tr : ds.transactions) {
        if (tr.date < wstart || tr.date > wend) continue;
        bool keep = true;
        for (const auto& cl : filter.clauses) {
            if (cl.field == "id") {
                keep = compare_string(tr.customer_id, cl.op, cl.value);
            } else if (cl.field == "date") {
                keep = compare_double(static_cast<double>(tr.date), cl.op,
                                      static_cast<double>(parse_date(cl.value, date_format)));
            } else {
                double v;
                try {
                    v = std::stod(cl.value);
                } catch (...) {
                    throw InputError("bad numeric value '" + cl.value + "' in filter");
                }
                keep = tr.price.has_value() && compare_double(*tr.price, cl.op, v);
            }
            if (!keep) break;
        }
        if (keep)
            out.rows.push_back({tr.customer_id, format_date(tr.date),
                                tr.price ? fmt(*tr.price) : std::string()});
    }
    return out;
}

}  // namespace clv
