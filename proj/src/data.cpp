#include "swarmtune/data.hpp"

#include "swarmtune/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace swarmtune::data {

namespace chr = std::chrono;

namespace {

constexpr std::array<std::string_view, 7> kDayNames{"sun", "mon", "tue", "wed", "thu", "fri", "sat"};

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
    return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

chr::sys_days day_of(Timestamp t) { return chr::floor<chr::days>(t); }

int minute_of_day(Timestamp t) {
    return static_cast<int>((t - chr::floor<chr::days>(t)).count());
}

} // namespace

std::optional<Timestamp> parse_timestamp(std::string_view date, std::string_view time) {
    if (date.size() != 10 || date[4] != '-' || date[7] != '-') return std::nullopt;
    if (time.size() != 5 || time[2] != ':') return std::nullopt;
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0;
    if (!parse_int(date.substr(0, 4), y) || !parse_int(date.substr(5, 2), mo) ||
        !parse_int(date.substr(8, 2), d) || !parse_int(time.substr(0, 2), h) ||
        !parse_int(time.substr(3, 2), mi))
        return std::nullopt;
    const chr::year_month_day ymd{chr::year{y}, chr::month{mo}, chr::day{d}};
    if (!ymd.ok() || h > 23 || mi > 59) return std::nullopt;
    return Timestamp{chr::sys_days{ymd}} + chr::hours{h} + chr::minutes{mi};
}

std::string format_date(Timestamp t) {
    const chr::year_month_day ymd{day_of(t)};
    return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

std::string format_time(Timestamp t) {
    const int m = minute_of_day(t);
    return fmt::format("{:02}:{:02}", m / 60, m % 60);
}

std::string format_timestamp(Timestamp t) { return format_date(t) + ' ' + format_time(t); }

unsigned day_of_week(Timestamp t) { return chr::weekday{day_of(t)}.c_encoding(); }

std::string_view day_name(unsigned c_encoding) { return kDayNames.at(c_encoding); }

std::optional<unsigned> day_from_name(std::string_view name) {
    for (unsigned i = 0; i < kDayNames.size(); ++i)
        if (kDayNames[i] == name) return i;
    return std::nullopt;
}

IngestResult ingest_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));

    std::string line;
    if (!std::getline(in, line)) throw DataError(fmt::format("'{}' is empty", path.string()));
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_fields(line);
    auto column = [&](std::string_view name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw DataError(fmt::format("'{}' is missing column '{}'", path.string(), name));
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_ap = column("ap_id"), c_date = column("date"), c_time = column("time"),
                      c_mac = column("mac"), c_building = column("building");

    IngestResult result;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            result.skipped.push_back(
                {line_no, fmt::format("expected {} fields, got {}", header.size(), fields.size())});
            continue;
        }
        const auto ts = parse_timestamp(fields[c_date], fields[c_time]);
        if (!ts) {
            result.skipped.push_back({line_no, fmt::format("unparseable date/time '{} {}'",
                                                           fields[c_date], fields[c_time])});
            continue;
        }
        if (fields[c_ap].empty() || fields[c_mac].empty() || fields[c_building].empty()) {
            result.skipped.push_back({line_no, "empty identifier"});
            continue;
        }
        result.records.push_back({std::string(fields[c_ap]), *ts, std::string(fields[c_mac]),
                                  std::string(fields[c_building])});
    }
    if (result.records.empty())
        throw DataError(fmt::format("'{}' holds no valid records ({} skipped)", path.string(),
                                    result.skipped.size()));
    return result;
}

void write_csv(const std::filesystem::path& path, const std::vector<ConnectionRecord>& records) {
    auto out = open_for_write(path);
    out << kConnectionHeader << '\n';
    for (const auto& r : records)
        out << r.ap_id << ',' << format_date(r.timestamp) << ',' << format_time(r.timestamp) << ','
            << r.mac << ',' << r.building << '\n';
    finish_write(out, path);
}

std::array<std::vector<ConnectionRecord>, 7>
split_by_day_of_week(const std::vector<ConnectionRecord>& records) {
    std::array<std::vector<ConnectionRecord>, 7> parts;
    for (const auto& r : records) parts[day_of_week(r.timestamp)].push_back(r);
    return parts;
}

std::vector<OccupancySeries> bucket_counts(const std::vector<ConnectionRecord>& records,
                                           int bucket_minutes) {
    if (bucket_minutes <= 0 || 60 % bucket_minutes != 0)
        throw std::invalid_argument(fmt::format("bucket width {} does not divide 60", bucket_minutes));
    const chr::minutes width{bucket_minutes};

    std::set<chr::sys_days> days;
    std::map<LocationKey, std::unordered_map<std::int64_t, std::unordered_set<std::string_view>>> macs;
    for (const auto& r : records) {
        days.insert(day_of(r.timestamp));
        const auto bucket = chr::floor<chr::minutes>(r.timestamp.time_since_epoch() / width * width);
        macs[{r.building, r.ap_id}][bucket.count()].insert(r.mac);
    }

    std::vector<OccupancySeries> out;
    out.reserve(macs.size());
    const int per_day = 1440 / bucket_minutes;
    for (const auto& [location, by_bucket] : macs) {
        OccupancySeries series{location, bucket_minutes, {}};
        series.buckets.reserve(days.size() * per_day);
        for (const auto day : days) {
            for (int b = 0; b < per_day; ++b) {
                const Timestamp start = Timestamp{day} + b * width;
                const auto it = by_bucket.find(start.time_since_epoch().count());
                series.buckets.push_back(
                    {start, it == by_bucket.end() ? 0 : static_cast<int>(it->second.size())});
            }
        }
        out.push_back(std::move(series));
    }
    return out;
}

std::vector<std::string> feature_names_for(const std::vector<LocationKey>& locations) {
    std::vector<std::string> names;
    for (const auto& loc : locations) names.push_back(fmt::format("loc_{}_{}", loc.building, loc.ap_id));
    for (const char* name :
         {"minute_sin", "minute_cos", "day_of_week", "count", "count_lag15", "count_lag30"})
        names.emplace_back(name);
    return names;
}

SupervisedSet build_supervised(const std::vector<OccupancySeries>& series, int horizon_minutes,
                               std::vector<LocationKey> locations) {
    if (horizon_minutes <= 0) throw DataError("horizon must be positive");
    if (locations.empty())
        for (const auto& s : series) locations.push_back(s.location);

    SupervisedSet set;
    set.horizon_minutes = horizon_minutes;
    set.feature_names = feature_names_for(locations);
    set.locations = locations;

    bool anchored = false;
    for (const auto& s : series) {
        if (s.bucket_minutes <= 0 || horizon_minutes % s.bucket_minutes != 0)
            throw DataError(fmt::format("bucket width {} does not divide horizon {}",
                                        s.bucket_minutes, horizon_minutes));
        if (s.buckets.empty()) continue;
        const Timestamp midnight{day_of(s.buckets.front().start)};
        if (!anchored || midnight < set.anchor) set.anchor = midnight;
        anchored = true;
    }

    const std::size_t n_loc = locations.size();
    for (const auto& s : series) {
        const auto loc_it = std::find(locations.begin(), locations.end(), s.location);
        if (loc_it == locations.end())
            throw DataError(fmt::format("series location {}/{} not in the location list",
                                        s.location.building, s.location.ap_id));
        const auto loc = static_cast<std::size_t>(loc_it - locations.begin());
        const chr::minutes width{s.bucket_minutes};

        std::unordered_map<std::int64_t, int> count_at;
        count_at.reserve(s.buckets.size());
        for (const auto& b : s.buckets) count_at.emplace(b.start.time_since_epoch().count(), b.count);
        auto lookup = [&](Timestamp t) -> std::optional<int> {
            const auto it = count_at.find(t.time_since_epoch().count());
            if (it == count_at.end()) return std::nullopt;
            return it->second;
        };
        auto bucket_containing = [&](Timestamp t) {
            return Timestamp{chr::floor<chr::minutes>(t.time_since_epoch() / width * width)};
        };

        for (const auto& b : s.buckets) {
            const auto target = lookup(b.start + chr::minutes{horizon_minutes});
            if (!target) continue;
            SupervisedRow row{b.start, loc, std::vector<double>(n_loc + 6, 0.0), *target};
            row.features[loc] = 1.0;
            const double angle = 2.0 * std::numbers::pi * minute_of_day(b.start) / 1440.0;
            row.features[n_loc + 0] = std::sin(angle);
            row.features[n_loc + 1] = std::cos(angle);
            row.features[n_loc + 2] = day_of_week(b.start);
            row.features[n_loc + 3] = b.count;
            row.features[n_loc + 4] = lookup(bucket_containing(b.start - chr::minutes{15})).value_or(0);
            row.features[n_loc + 5] = lookup(bucket_containing(b.start - chr::minutes{30})).value_or(0);
            set.rows.push_back(std::move(row));
        }
    }
    if (set.rows.empty()) throw DataError("series too short to form any supervised row");
    return set;
}

std::pair<SupervisedSet, SupervisedSet> split_train_test(const SupervisedSet& set,
                                                         const SplitSpec& spec) {
    if (spec.train_weeks < 1 || spec.test_week < spec.train_weeks)
        throw std::invalid_argument("test week must follow the training weeks");

    SupervisedSet train = set, test = set;
    train.rows.clear();
    test.rows.clear();
    std::int64_t last_week = -1;
    for (const auto& row : set.rows) {
        const auto week = chr::floor<chr::weeks>(row.time - set.anchor).count();
        last_week = std::max<std::int64_t>(last_week, week);
        if (spec.day_of_week && day_of_week(row.time) != *spec.day_of_week) continue;
        if (week < spec.train_weeks)
            train.rows.push_back(row);
        else if (week == spec.test_week)
            test.rows.push_back(row);
    }
    if (last_week < spec.test_week)
        throw DataError(fmt::format("rows span {} week(s); the test week is week {}",
                                    last_week + 1, spec.test_week + 1));
    if (train.rows.empty() || test.rows.empty())
        throw DataError("train/test split left one side empty");
    return {std::move(train), std::move(test)};
}

void SynthConfig::validate() const {
    if (n_buildings < 1 || aps_per_building < 1 || weeks < 1)
        throw std::invalid_argument("synth counts must be positive");
    if (!(base_rate > 0) || !std::isfinite(base_rate))
        throw std::invalid_argument("base_rate must be positive");
    if (!parse_timestamp(start_date, "00:00"))
        throw std::invalid_argument(fmt::format("bad start_date '{}'", start_date));
}

double weekly_factor(unsigned c_encoding) {
    // Relative weekday volumes; Wednesday is the reference.
    static constexpr std::array<double, 7> factors{0.10, 0.79, 0.99, 1.00, 0.93, 0.56, 0.16};
    return factors.at(c_encoding);
}

double diurnal_factor(int minute_of_day) {
    // Active between 06:00 and 22:00, peaking at 14:00.
    const double phase = std::numbers::pi * (minute_of_day - 360) / 960.0;
    return kDiurnalFloor + (1.0 - kDiurnalFloor) * std::max(0.0, std::sin(phase));
}

double ap_scale(const SynthConfig& config, int building, int ap) {
    Rng rng(derive_seed(config.seed, 0x5ca1e, static_cast<std::uint64_t>(building) * 4096 + ap));
    return rng.uniform(0.6, 1.4);
}

double intensity(const SynthConfig& config, int building, int ap, Timestamp t) {
    return config.base_rate * ap_scale(config, building, ap) * weekly_factor(day_of_week(t)) *
           diurnal_factor(minute_of_day(t));
}

std::size_t mac_pool_size(const SynthConfig& config) {
    return std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(config.base_rate * 45.0)));
}

std::string building_name(int building) { return fmt::format("B{:02}", building + 1); }

std::string ap_name(int building, int ap) { return fmt::format("AP{:02}{:02}", building + 1, ap + 1); }

std::vector<ConnectionRecord> synth_generate(const SynthConfig& config) {
    config.validate();
    const Timestamp start = *parse_timestamp(config.start_date, "00:00");
    const int total_minutes = config.weeks * 7 * 1440;
    const std::size_t pool = mac_pool_size(config);

    std::vector<ConnectionRecord> records;
    for (int b = 0; b < config.n_buildings; ++b) {
        const std::string building = building_name(b);
        for (int a = 0; a < config.aps_per_building; ++a) {
            const std::string ap = ap_name(b, a);
            const double scale = ap_scale(config, b, a);
            std::vector<std::string> macs(pool);
            for (std::size_t i = 0; i < pool; ++i)
                macs[i] = fmt::format("02:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", b & 0xff, a & 0xff,
                                      (i >> 16) & 0xff, (i >> 8) & 0xff, i & 0xff);

            Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(a)));
            for (int m = 0; m < total_minutes; ++m) {
                const Timestamp t = start + chr::minutes{m};
                const double lambda = config.base_rate * scale * weekly_factor(day_of_week(t)) *
                                      diurnal_factor(m % 1440);
                std::poisson_distribution<int> arrivals(lambda);
                const int k = arrivals(rng.engine());
                for (int j = 0; j < k; ++j) records.push_back({ap, t, macs[rng.below(pool)], building});
            }
        }
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
    return records;
}

void write_series_csv(const std::filesystem::path& path, const std::vector<OccupancySeries>& series) {
    auto out = open_for_write(path);
    out << "building,ap_id,bucket_start,bucket_minutes,count\n";
    for (const auto& s : series)
        for (const auto& b : s.buckets)
            out << s.location.building << ',' << s.location.ap_id << ',' << format_timestamp(b.start)
                << ',' << s.bucket_minutes << ',' << b.count << '\n';
    finish_write(out, path);
}

void write_supervised_csv(const std::filesystem::path& path, const SupervisedSet& set) {
    auto out = open_for_write(path);
    out << "time,building,ap_id,horizon_minutes";
    for (const auto& name : set.feature_names) out << ',' << name;
    out << ",target\n";
    for (const auto& row : set.rows) {
        const auto& loc = set.locations.at(row.location);
        out << format_timestamp(row.time) << ',' << loc.building << ',' << loc.ap_id << ','
            << set.horizon_minutes;
        for (double f : row.features) out << ',' << fmt::format("{}", f);
        out << ',' << row.target << '\n';
    }
    finish_write(out, path);
}

} // namespace swarmtune::data
