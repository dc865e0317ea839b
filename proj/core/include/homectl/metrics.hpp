#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "homectl/dataset.hpp"

namespace homectl {

// One token per CJK code point, one per maximal ASCII alphanumeric run;
// everything else is dropped.
std::vector<std::string> tokenize(std::string_view text);

// Multiset token F1; 0 when either side is empty.
double f1(std::span<const std::string> pred, std::span<const std::string> ref);
double f1(std::string_view pred, std::string_view ref);

// Clipped unigram precision times the brevity penalty; 0 for an empty
// prediction.
double bleu1(std::span<const std::string> pred, std::span<const std::string> ref);
double bleu1(std::string_view pred, std::string_view ref);

struct MetricRow {
    MajorCategory category = MajorCategory::NoMemory;
    double f1 = 0.0;
    double bleu1 = 0.0;
    bool accuracy_bit = false;
};

struct MetricCell {
    size_t count = 0;
    size_t hits = 0;  // rows with accuracy_bit set
    double f1 = 0.0;
    double bleu1 = 0.0;
    double accuracy = 0.0;
};

struct MetricReport {
    std::map<MajorCategory, MetricCell> per_category;  // only categories present
    MetricCell overall;

    json to_json() const;
    std::string to_csv() const;
};

class MetricsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Per-category means and sample-weighted overall means. Throws MetricsError
// on empty input.
MetricReport aggregate(std::span<const MetricRow> rows);

}  // namespace homectl
