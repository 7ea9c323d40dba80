#include "gasim/dataset.hpp"

#include <cctype>
#include <cmath>
#include <ctime>
#include <fstream>

#include <json.hpp>

namespace gasim {

using nlohmann::json;

std::int64_t DatasetRecord::epoch_seconds() const {
    if (posting_time.empty()) throw Error("DatasetRecord: empty posting_time");
    bool numeric = true;
    for (std::size_t i = 0; i < posting_time.size(); ++i) {
        const char c = posting_time[i];
        if (!(std::isdigit(static_cast<unsigned char>(c)) || (i == 0 && c == '-'))) {
            numeric = false;
            break;
        }
    }
    if (numeric) return std::stoll(posting_time);

    std::tm tm = {};
    int year, month, day, hour = 0, minute = 0, second = 0;
    const int fields = std::sscanf(posting_time.c_str(), "%d-%d-%d %d:%d:%d", &year, &month,
                                   &day, &hour, &minute, &second);
    if (fields < 3)
        throw Error("DatasetRecord: unparseable posting_time '" + posting_time + "'");
    tm.tm_year = year - 1900;
    tm.tm_mon = month - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = minute;
    tm.tm_sec = second;
    return static_cast<std::int64_t>(timegm(&tm));
}

namespace {

DatasetRecord parse_record(const json& obj) {
    DatasetRecord r;
    r.user_id = obj.at("user_id").get<std::string>();
    if (r.user_id.empty()) throw Error("user_id must be non-empty");
    r.user_description = obj.value("user_description", std::string{});
    r.follower_count = obj.value("follower_count", std::int64_t{0});
    r.following_count = obj.value("following_count", std::int64_t{0});
    r.tweet_content = obj.value("tweet_content", std::string{});
    r.posting_time = obj.at("posting_time").get<std::string>();
    r.opinion_value = obj.at("opinion_value").get<double>();
    if (r.opinion_value < -1.0 || r.opinion_value > 1.0)
        throw Error("opinion_value outside [-1, 1]");
    r.epoch_seconds();  // reject unparseable timestamps here
    return r;
}

void interpolate_missing(std::vector<double>& values, const std::vector<bool>& defined) {
    const int t = static_cast<int>(values.size());
    int prev = -1;
    for (int i = 0; i < t; ++i) {
        if (!defined[i]) continue;
        if (prev == -1) {
            for (int j = 0; j < i; ++j) values[j] = values[i];
        } else {
            for (int j = prev + 1; j < i; ++j) {
                const double frac = static_cast<double>(j - prev) / (i - prev);
                values[j] = values[prev] + frac * (values[i] - values[prev]);
            }
        }
        prev = i;
    }
    if (prev >= 0)
        for (int j = prev + 1; j < t; ++j) values[j] = values[prev];
}

}  // namespace

Dataset load_dataset(const std::string& path, int t_max) {
    if (t_max < 1) throw Error("load_dataset: t_max must be >= 1");
    std::ifstream in(path);
    if (!in) throw Error("load_dataset: cannot open " + path);

    Dataset data;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        try {
            data.records.push_back(parse_record(json::parse(line)));
        } catch (const std::exception& e) {
            throw Error("load_dataset: " + path + ":" + std::to_string(line_number) + ": " +
                        e.what());
        }
    }
    if (data.records.empty()) throw Error("load_dataset: no valid records in " + path);

    std::int64_t lo = data.records.front().epoch_seconds();
    std::int64_t hi = lo;
    for (const auto& r : data.records) {
        lo = std::min(lo, r.epoch_seconds());
        hi = std::max(hi, r.epoch_seconds());
    }

    data.record_window.reserve(data.records.size());
    std::vector<double> sums(t_max, 0.0);
    std::vector<int> counts(t_max, 0);
    for (const auto& r : data.records) {
        int w = 0;
        if (hi > lo) {
            const double frac =
                static_cast<double>(r.epoch_seconds() - lo) / static_cast<double>(hi - lo);
            w = std::min(t_max - 1, static_cast<int>(frac * t_max));
        }
        data.record_window.push_back(w);
        sums[w] += r.opinion_value;
        ++counts[w];
    }

    std::vector<double> truth(t_max, 0.0);
    std::vector<bool> defined(t_max, false);
    for (int w = 0; w < t_max; ++w) {
        if (counts[w] > 0) {
            truth[w] = sums[w] / counts[w];
            defined[w] = true;
        }
    }
    interpolate_missing(truth, defined);
    data.truth.assign(truth.begin(), truth.end());
    return data;
}

void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error("save_dataset: cannot open " + path);
    for (const auto& r : records) {
        const json obj = {
            {"user_id", r.user_id},
            {"user_description", r.user_description},
            {"follower_count", r.follower_count},
            {"following_count", r.following_count},
            {"tweet_content", r.tweet_content},
            {"posting_time", r.posting_time},
            {"opinion_value", r.opinion_value},
        };
        out << obj.dump() << "\n";
    }
    if (!out) throw Error("save_dataset: write failed for " + path);
}

}  // namespace gasim
