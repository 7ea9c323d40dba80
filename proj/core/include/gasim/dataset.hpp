#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gasim/metrics.hpp"
#include "gasim/types.hpp"

namespace gasim {

/// One line of a dataset file. posting_time accepts either
/// "YYYY-MM-DD HH:MM:SS" or raw epoch seconds.
struct DatasetRecord {
    std::string user_id;
    std::string user_description;
    std::int64_t follower_count = 0;
    std::int64_t following_count = 0;
    std::string tweet_content;
    std::string posting_time;
    double opinion_value = 0.0;

    std::int64_t epoch_seconds() const;

    bool operator==(const DatasetRecord&) const = default;
};

struct Dataset {
    std::vector<DatasetRecord> records;
    TrendCurve truth;                 // per-window mean opinion, gaps interpolated
    std::vector<int> record_window;   // time window of each record
};

/// Parses a line-delimited JSON dataset and buckets posting times into t_max
/// equal-width windows. Malformed lines raise an error naming the line
/// number; an empty dataset is an error.
Dataset load_dataset(const std::string& path, int t_max);

/// Writes records as line-delimited JSON; load_dataset(save_dataset(x)) == x.
void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records);

}  // namespace gasim
