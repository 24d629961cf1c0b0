// Transaction-log ingestion, per-customer aggregation, estimation/holdout
// splitting, covariate attachment, and descriptive statistics.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "clv/dates.hpp"

namespace clv {

struct TimeUnit {
    enum class Kind { hour, day, week, year };
    Kind kind = Kind::week;

    double units_per_year() const;    // k: 52 for week, 365 for day
    double seconds_per_unit() const;
    // raw transactions are collapsed to days for day/week/year, seconds for hour
    bool day_granularity() const { return kind != Kind::hour; }
    std::string name() const;

    static TimeUnit parse(const std::string& text);  // throws InputError
};

struct TransactionRecord {
    std::string customer_id;
    Timestamp date = 0;
    std::optional<double> price;
};

// one aggregated transaction (same-day or same-second purchases merged)
struct AggTransaction {
    std::string customer_id;
    Timestamp date = 0;
    std::optional<double> price;
};

struct CustomerSummary {
    std::string customer_id;
    int x = 0;              // repeat transactions in the estimation period
    double t_x = 0.0;       // recency, time units since first purchase
    double big_t = 0.0;     // observed time T since first purchase
    std::optional<double> mean_spending;  // across estimation transactions
    Timestamp first_date = 0;
};

struct CovariateTable {
    enum class Mode { static_cov, dynamic_cov };
    Mode mode = Mode::static_cov;
    std::vector<std::string> names;
    // static: one row per customer
    std::map<std::string, std::vector<double>> static_rows;
    // dynamic: per customer, interval start dates (time-unit spacing) and one
    // value vector per interval
    struct DynRow {
        std::vector<Timestamp> starts;
        std::vector<std::vector<double>> values;
    };
    std::map<std::string, DynRow> dynamic_rows;

    // Expands categorical columns into k-1 indicators (baseline = first level
    // in sort order). raw columns are per-row strings keyed like the CSV.
    static CovariateTable from_columns(Mode mode, const std::vector<std::string>& names,
                                       const std::vector<std::string>& ids,
                                       const std::vector<Timestamp>& dates,  // empty when static
                                       const std::vector<std::vector<std::string>>& columns);
};

struct IngestOptions {
    TimeUnit time_unit;
    // split after this many time units, or at this date; absent = no holdout
    std::optional<std::variant<double, Timestamp>> estimation_split;
    std::optional<Timestamp> data_end;  // fictional end beyond the last record
    // keep second-resolution timestamps even for day-granularity units;
    // simulated logs use this so aggregation does not thin the process
    bool second_resolution = false;
};

class ClvDataset {
  public:
    std::vector<CustomerSummary> summaries;
    TimeUnit time_unit;
    Timestamp estimation_start = 0;
    Timestamp estimation_end = 0;
    std::optional<Timestamp> holdout_end;
    double estimation_length = 0.0;  // time units
    std::vector<AggTransaction> transactions;  // aggregated, sorted by (id, date)
    bool has_prices = false;
    std::optional<CovariateTable> cov_life;
    std::optional<CovariateTable> cov_trans;

    bool has_holdout() const { return holdout_end.has_value(); }
    double holdout_length() const;  // 0 when absent
    double to_units(Timestamp from, Timestamp to) const;
    const CustomerSummary& summary_for(const std::string& id) const;
};

ClvDataset ingest(const std::vector<TransactionRecord>& records, const IngestOptions& options);

// Reads Id/Date/Price records from CSV with configurable column names.
std::vector<TransactionRecord> records_from_csv(const std::string& path,
                                                const std::string& date_format,
                                                const std::string& id_col = "Id",
                                                const std::string& date_col = "Date",
                                                const std::string& price_col = "Price");

struct PeriodStats {
    bool present = false;
    Timestamp start = 0, end = 0;
    std::optional<Timestamp> first_transaction, last_transaction;
    std::int64_t n_transactions = 0;
    double mean_transactions = 0.0, sd_transactions = 0.0;
    std::optional<double> mean_spending, sd_spending, total_spending;
    std::optional<std::int64_t> zero_repeaters;        // estimation only
    std::optional<double> zero_repeater_percent;
    std::optional<double> mean_interpurchase, sd_interpurchase;
};

struct SummaryReport {
    std::string time_unit_name;
    double estimation_length = 0.0;
    double holdout_length = 0.0;
    std::int64_t n_customers = 0;
    PeriodStats estimation, holdout, total;
};

SummaryReport summarize(const ClvDataset& ds);

// plain table of named columns; every cell formatted as text
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

enum class SeriesKind { tracking, frequency, spending, interpurchasetime, timings };
enum class Sample { estimation, holdout, full };

struct SeriesOptions {
    Sample sample = Sample::full;
    bool mean_spending = true;           // spending series: per-customer means
    std::vector<std::string> ids;        // timings: explicit subset
    int random_ids = 0;                  // timings: or pick this many, seeded
    std::uint64_t seed = 1;
};

Table descriptive_series(const ClvDataset& ds, SeriesKind which, const SeriesOptions& options);

ClvDataset attach_covariates(const ClvDataset& ds, CovariateTable life, CovariateTable trans);

// conjunction of comparisons on Id / Date / Price
struct SubsetFilter {
    struct Clause {
        std::string field;  // "id", "date", "price"
        std::string op;     // == != <= >= < >
        std::string value;
    };
    std::vector<Clause> clauses;

    // parses e.g. "Price >= 50 & Price <= 100"; empty selects everything
    static SubsetFilter parse(const std::string& expr);
};

Table subset(const ClvDataset& ds, const SubsetFilter& filter, Sample sample,
             const std::string& date_format = "ymd");

}  // namespace clv
