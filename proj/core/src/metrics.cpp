#include "homectl/metrics.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

#include "homectl/text.hpp"

namespace homectl {

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::string run;
    for (char32_t cp : text::decode_utf8(s)) {
        if (text::is_ascii_alnum(cp)) {
            run.push_back(static_cast<char>(cp));
            continue;
        }
        if (!run.empty()) out.push_back(std::move(run)), run.clear();
        if (text::is_cjk(cp)) {
            std::string t;
            text::append_utf8(t, cp);
            out.push_back(std::move(t));
        }
    }
    if (!run.empty()) out.push_back(std::move(run));
    return out;
}

namespace {

std::unordered_map<std::string_view, size_t> counts(std::span<const std::string> toks) {
    std::unordered_map<std::string_view, size_t> m;
    for (const auto& t : toks) ++m[t];
    return m;
}

// Clipped overlap: sum over pred types of min(count_pred, count_ref).
size_t overlap(std::span<const std::string> pred, std::span<const std::string> ref) {
    const auto rc = counts(ref);
    size_t n = 0;
    for (const auto& [tok, c] : counts(pred)) {
        if (auto it = rc.find(tok); it != rc.end()) n += std::min(c, it->second);
    }
    return n;
}

}  // namespace

double f1(std::span<const std::string> pred, std::span<const std::string> ref) {
    if (pred.empty() || ref.empty()) return 0.0;
    const size_t common = overlap(pred, ref);
    if (common == 0) return 0.0;
    const double p = static_cast<double>(common) / static_cast<double>(pred.size());
    const double r = static_cast<double>(common) / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

double f1(std::string_view pred, std::string_view ref) {
    const auto a = tokenize(pred), b = tokenize(ref);
    return f1(std::span<const std::string>(a), std::span<const std::string>(b));
}

double bleu1(std::span<const std::string> pred, std::span<const std::string> ref) {
    if (pred.empty()) return 0.0;
    const double c = static_cast<double>(pred.size());
    const double r = static_cast<double>(ref.size());
    const double p1 = static_cast<double>(overlap(pred, ref)) / c;
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * p1;
}

double bleu1(std::string_view pred, std::string_view ref) {
    const auto a = tokenize(pred), b = tokenize(ref);
    return bleu1(std::span<const std::string>(a), std::span<const std::string>(b));
}

MetricReport aggregate(std::span<const MetricRow> rows) {
    if (rows.empty()) throw MetricsError("cannot aggregate an empty set of rows");
    MetricReport rep;
    auto add = [](MetricCell& cell, const MetricRow& row) {
        ++cell.count;
        cell.hits += row.accuracy_bit ? 1 : 0;
        cell.f1 += row.f1;
        cell.bleu1 += row.bleu1;
    };
    for (const auto& row : rows) {
        add(rep.per_category[row.category], row);
        add(rep.overall, row);
    }
    auto finish = [](MetricCell& cell) {
        const double n = static_cast<double>(cell.count);
        cell.f1 /= n;
        cell.bleu1 /= n;
        cell.accuracy = static_cast<double>(cell.hits) / n;
    };
    for (auto& [_, cell] : rep.per_category) finish(cell);
    finish(rep.overall);
    return rep;
}

namespace {

json cell_json(const MetricCell& c) {
    return {{"count", c.count}, {"hits", c.hits}, {"f1", c.f1}, {"bleu1", c.bleu1}, {"accuracy", c.accuracy}};
}

}  // namespace

json MetricReport::to_json() const {
    json cats = json::object();
    for (const auto& [cat, cell] : per_category) cats[std::string(to_string(cat))] = cell_json(cell);
    return {{"per_category", cats}, {"overall", cell_json(overall)}};
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << "category,count,f1,bleu1,accuracy\n";
    auto line = [&](std::string_view name, const MetricCell& c) {
        os << name << ',' << c.count << ',' << c.f1 << ',' << c.bleu1 << ',' << c.accuracy << '\n';
    };
    for (const auto& [cat, cell] : per_category) line(to_string(cat), cell);
    line("overall", overall);
    return os.str();
}

}  // namespace homectl
