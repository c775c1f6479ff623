#ifndef SWARMTUNE_DATA_HPP
#define SWARMTUNE_DATA_HPP

#include <array>
#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

/// Wi-Fi connection logs, occupancy series and supervised prediction sets.
namespace swarmtune::data {

using Timestamp = std::chrono::sys_time<std::chrono::minutes>;

class DataError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// "YYYY-MM-DD" and "HH:MM"; std::nullopt when malformed or out of range.
std::optional<Timestamp> parse_timestamp(std::string_view date, std::string_view time);
std::string format_date(Timestamp t);
std::string format_time(Timestamp t);
std::string format_timestamp(Timestamp t);  ///< "YYYY-MM-DD HH:MM"

/// C encoding: 0 = Sunday.
unsigned day_of_week(Timestamp t);
std::string_view day_name(unsigned c_encoding);  ///< "sun".."sat"
std::optional<unsigned> day_from_name(std::string_view name);

struct ConnectionRecord {
    std::string ap_id;
    Timestamp timestamp;
    std::string mac;
    std::string building;

    bool operator==(const ConnectionRecord&) const = default;
};

struct SkippedRow {
    std::size_t line;
    std::string reason;
};

struct IngestResult {
    std::vector<ConnectionRecord> records;
    std::vector<SkippedRow> skipped;
};

inline constexpr std::string_view kConnectionHeader = "ap_id,date,time,mac,building";

/// Reads a connection log. Columns are located by header name. Malformed rows
/// are skipped and reported; throws DataError for a missing file, missing
/// columns or zero valid rows.
IngestResult ingest_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<ConnectionRecord>& records);

/// Partition indexed by day_of_week().
std::array<std::vector<ConnectionRecord>, 7>
split_by_day_of_week(const std::vector<ConnectionRecord>& records);

struct LocationKey {
    std::string building;
    std::string ap_id;

    auto operator<=>(const LocationKey&) const = default;
};

struct Bucket {
    Timestamp start;
    int count;
};

struct OccupancySeries {
    LocationKey location;
    int bucket_minutes = 15;
    std::vector<Bucket> buckets;
};

/// Distinct MACs per location per bucket. Every location gets the full set of
/// buckets for each calendar day that holds at least one record; buckets
/// without records count zero. Sorted by location. bucket_minutes must
/// divide 60.
std::vector<OccupancySeries> bucket_counts(const std::vector<ConnectionRecord>& records,
                                           int bucket_minutes);

struct SupervisedRow {
    Timestamp time;
    std::size_t location;  ///< index into SupervisedSet::locations
    std::vector<double> features;
    int target;
};

struct SupervisedSet {
    std::vector<std::string> feature_names;
    std::vector<LocationKey> locations;
    int horizon_minutes = 60;
    /// Midnight of the earliest bucket; week k covers [anchor + 7k days, +7 days).
    Timestamp anchor{};
    std::vector<SupervisedRow> rows;

    std::size_t feature_dim() const noexcept { return feature_names.size(); }
};

/// One row per bucket whose +horizon bucket exists. Features: location
/// one-hot, sin/cos of minute-of-day, day-of-week code, current count and the
/// counts 15 and 30 minutes earlier (0 when that bucket is absent). Throws
/// DataError when no row can be formed or the width does not divide the
/// horizon.
/// `locations` fixes the one-hot layout; when empty it is taken from `series`.
SupervisedSet build_supervised(const std::vector<OccupancySeries>& series, int horizon_minutes,
                               std::vector<LocationKey> locations = {});

std::vector<std::string> feature_names_for(const std::vector<LocationKey>& locations);

struct SplitSpec {
    std::optional<unsigned> day_of_week;
    int train_weeks = 5;  ///< weeks [0, train_weeks) train
    int test_week = 5;    ///< zero-based index of the test week
};

/// Rows outside the train and test weeks are dropped. Throws DataError when
/// the rows do not reach the test week or either side is empty.
std::pair<SupervisedSet, SupervisedSet> split_train_test(const SupervisedSet& set,
                                                         const SplitSpec& spec);

struct SynthConfig {
    int n_buildings = 2;
    int aps_per_building = 3;
    int weeks = 6;
    /// Peak records per minute for an AP of unit scale on the busiest weekday.
    double base_rate = 20.0;
    std::uint64_t seed = 1;
    std::string start_date = "2016-01-15";

    void validate() const;
};

/// Weekly volume factor by C-encoded day, shaped after weekday-heavy campus
/// traffic (busiest midweek, weekends lightest).
double weekly_factor(unsigned c_encoding);
/// Daytime-peaked profile in [floor, 1] over minute of day.
double diurnal_factor(int minute_of_day);
inline constexpr double kDiurnalFloor = 0.05;
/// Per-AP intensity multiplier in [0.6, 1.4], a pure function of the seed.
double ap_scale(const SynthConfig& config, int building, int ap);
/// Records per minute for one AP at a given instant.
double intensity(const SynthConfig& config, int building, int ap, Timestamp t);
/// MAC pool size used for one AP.
std::size_t mac_pool_size(const SynthConfig& config);

std::string building_name(int building);
std::string ap_name(int building, int ap);

/// Per-AP Poisson arrivals on a one-minute grid; each record re-associates a
/// MAC drawn from that AP's device pool. Output is sorted by timestamp.
std::vector<ConnectionRecord> synth_generate(const SynthConfig& config);

void write_series_csv(const std::filesystem::path& path, const std::vector<OccupancySeries>& series);
void write_supervised_csv(const std::filesystem::path& path, const SupervisedSet& set);

} // namespace swarmtune::data

#endif // SWARMTUNE_DATA_HPP
