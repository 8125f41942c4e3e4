#pragma once

// Rating files -> signed edges -> iterative k-core filter -> 70/10/20 split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfgnn/error.hpp"
#include "dfgnn/graph.hpp"
#include "dfgnn/rng.hpp"

namespace dfgnn {

struct RatingRecord {
    std::string user_key;
    std::string item_key;
    double rating = 0.0;
    std::optional<std::int64_t> timestamp;
};

struct RatingFormat {
    std::string delimiter = ",";
    int user_column = 0;
    int item_column = 1;
    int rating_column = 2;
    int timestamp_column = 3;  // used only when the row has that many fields

    static RatingFormat named(const std::string& name) {
        RatingFormat f;
        if (name == "csv") f.delimiter = ",";
        else if (name == "tsv") f.delimiter = "\t";
        else if (name == "dat") f.delimiter = "::";  // MovieLens style
        else throw InputError("unknown rating format '" + name + "' (csv, tsv, dat)");
        return f;
    }
};

struct IngestConfig {
    double neg_threshold = 3.0;  // rating < neg_threshold => negative
    double pos_threshold = 3.0;  // rating > pos_threshold => positive
    std::size_t min_interactions = 5;
    double train_fraction = 0.7;
    double validation_fraction = 0.1;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        if (neg_threshold > pos_threshold) throw InputError("neg_threshold must not exceed pos_threshold");
        if (train_fraction < 0 || validation_fraction < 0 || test_fraction < 0 ||
            std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9)
            throw InputError("split fractions must be nonnegative and sum to 1");
    }
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, const std::string& delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + delim.size();
    }
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::istringstream is(s);
    is.imbue(std::locale::classic());
    double v;
    if (!(is >> v)) return std::nullopt;
    char extra;
    if (is >> extra) return std::nullopt;
    return v;
}

} // namespace detail

/// Parses rating rows. Lines starting with '#' and blank lines are skipped;
/// a first data line whose rating field is not numeric is taken as a header.
inline std::vector<RatingRecord> parse_ratings(std::istream& in, const RatingFormat& fmt = {}) {
    std::vector<RatingRecord> out;
    std::string line;
    std::size_t lineno = 0;
    bool seen_data = false;
    const int needed = std::max({fmt.user_column, fmt.item_column, fmt.rating_column}) + 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty() || line[0] == '#') continue;
        const auto fields = detail::split_fields(line, fmt.delimiter);
        auto fail = [&](const std::string& why) {
            throw InputError("line " + std::to_string(lineno) + ": " + why);
        };
        if (static_cast<int>(fields.size()) < needed) fail("expected at least " + std::to_string(needed) + " fields");
        RatingRecord r;
        r.user_key = detail::trim(fields[static_cast<std::size_t>(fmt.user_column)]);
        r.item_key = detail::trim(fields[static_cast<std::size_t>(fmt.item_column)]);
        const auto rating = detail::parse_double(detail::trim(fields[static_cast<std::size_t>(fmt.rating_column)]));
        if (!rating) {
            if (!seen_data) {
                seen_data = true;
                continue;
            }
            fail("rating is not a number");
        }
        seen_data = true;
        if (r.user_key.empty() || r.item_key.empty()) fail("empty user or item key");
        if (!(*rating >= 1.0 && *rating <= 5.0)) fail("rating " + detail::trim(fields[static_cast<std::size_t>(fmt.rating_column)]) + " outside [1,5]");
        r.rating = *rating;
        if (fmt.timestamp_column >= 0 && static_cast<int>(fields.size()) > fmt.timestamp_column) {
            const auto ts = detail::trim(fields[static_cast<std::size_t>(fmt.timestamp_column)]);
            if (!ts.empty()) {
                try {
                    std::size_t pos = 0;
                    r.timestamp = std::stoll(ts, &pos);
                    if (pos != ts.size()) fail("bad timestamp");
                } catch (const std::logic_error&) {
                    fail("bad timestamp");
                }
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

/// +1 above pos_threshold, -1 below neg_threshold, nothing in between.
inline std::optional<Sign> sign_threshold(const RatingRecord& r, const IngestConfig& cfg = {}) {
    if (r.rating < cfg.neg_threshold) return Sign::negative;
    if (r.rating > cfg.pos_threshold) return Sign::positive;
    return std::nullopt;
}

/// Keeps one rating per (user, item): the latest by timestamp, ties and
/// missing timestamps resolved by the last occurrence. Output keeps the
/// position of each pair's first occurrence.
inline std::vector<RatingRecord> resolve_duplicates(const std::vector<RatingRecord>& records) {
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<RatingRecord> out;
    for (const auto& r : records) {
        const std::string key = r.user_key + '\x1f' + r.item_key;
        auto [it, inserted] = slot.emplace(key, out.size());
        if (inserted) {
            out.push_back(r);
            continue;
        }
        auto& kept = out[it->second];
        const bool older = kept.timestamp && r.timestamp && *r.timestamp < *kept.timestamp;
        if (!older) kept = r;
    }
    return out;
}

struct SignedRecord {
    std::string user_key;
    std::string item_key;
    Sign sign = Sign::positive;

    friend bool operator==(const SignedRecord&, const SignedRecord&) = default;
};

inline std::vector<SignedRecord> to_signed_records(const std::vector<RatingRecord>& records,
                                                   const IngestConfig& cfg = {}) {
    std::vector<SignedRecord> out;
    for (const auto& r : resolve_duplicates(records))
        if (auto s = sign_threshold(r, cfg)) out.push_back({r.user_key, r.item_key, *s});
    return out;
}

/// Repeatedly drops users and items with fewer than `min_interactions`
/// remaining interactions (both signs) until nothing changes.
inline std::vector<SignedRecord> iterative_core_filter(std::vector<SignedRecord> records,
                                                       std::size_t min_interactions) {
    while (true) {
        std::unordered_map<std::string, std::size_t> user_count, item_count;
        for (const auto& r : records) {
            ++user_count[r.user_key];
            ++item_count[r.item_key];
        }
        std::vector<SignedRecord> kept;
        kept.reserve(records.size());
        for (auto& r : records)
            if (user_count[r.user_key] >= min_interactions && item_count[r.item_key] >= min_interactions)
                kept.push_back(std::move(r));
        if (kept.size() == records.size()) return kept;
        records = std::move(kept);
    }
}

struct DatasetSplit {
    std::vector<SignedEdge> train;
    std::vector<SignedEdge> validation;
    std::vector<SignedEdge> test;
    std::vector<std::string> user_keys;  // dense index -> original key
    std::vector<std::string> item_keys;
    std::uint64_t seed = 0;

    std::size_t num_users() const { return user_keys.size(); }
    std::size_t num_items() const { return item_keys.size(); }

    std::vector<SignedEdge> all_edges() const {
        std::vector<SignedEdge> all = train;
        all.insert(all.end(), validation.begin(), validation.end());
        all.insert(all.end(), test.begin(), test.end());
        return all;
    }

    SignedBipartiteGraph train_graph() const { return build_graph(num_users(), num_items(), train); }
};

/// Seeded uniform permutation of the records, cut into train / validation /
/// test. Index maps cover every filtered record so test-only nodes have rows.
inline DatasetSplit split_dataset(const std::vector<SignedRecord>& records, const IngestConfig& cfg = {}) {
    cfg.validate();
    if (records.size() < 10) throw EmptyResultError("need at least 10 records to split, have " + std::to_string(records.size()));
    DatasetSplit split;
    split.seed = cfg.seed;
    std::unordered_map<std::string, std::size_t> users, items;
    std::vector<SignedEdge> edges;
    edges.reserve(records.size());
    for (const auto& r : records) {
        auto [u, un] = users.emplace(r.user_key, split.user_keys.size());
        if (un) split.user_keys.push_back(r.user_key);
        auto [v, vn] = items.emplace(r.item_key, split.item_keys.size());
        if (vn) split.item_keys.push_back(r.item_key);
        edges.push_back({u->second, v->second, r.sign});
    }
    Rng rng(cfg.seed);
    rng.shuffle(edges);
    const auto n = static_cast<double>(edges.size());
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * n));
    const auto n_val = std::min(edges.size() - n_train, static_cast<std::size_t>(std::llround(cfg.validation_fraction * n)));
    split.train.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_train),
                            edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), edges.end());
    return split;
}

struct DatasetStats {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::size_t num_instances = 0;
    double negative_rate = 0.0;
    std::uint64_t seed = 0;
};

inline DatasetStats dataset_stats(const DatasetSplit& split) {
    DatasetStats s;
    s.num_users = split.num_users();
    s.num_items = split.num_items();
    s.seed = split.seed;
    std::size_t neg = 0;
    for (const auto* part : {&split.train, &split.validation, &split.test}) {
        s.num_instances += part->size();
        for (const auto& e : *part) neg += e.sign == Sign::negative;
    }
    s.negative_rate = s.num_instances ? static_cast<double>(neg) / static_cast<double>(s.num_instances) : 0.0;
    return s;
}

inline nlohmann::json to_json(const DatasetStats& s) {
    return {{"num_users", s.num_users},
            {"num_items", s.num_items},
            {"num_instances", s.num_instances},
            {"negative_rate", s.negative_rate},
            {"seed", s.seed}};
}

/// k distinct items drawn uniformly from [0, num_items) minus `exclusion`.
inline std::vector<std::size_t> sample_ranking_negatives(std::size_t k, const std::unordered_set<std::size_t>& exclusion,
                                                         std::size_t num_items, Rng& rng) {
    std::size_t excluded = 0;
    for (auto i : exclusion) excluded += i < num_items;
    const std::size_t available = num_items - excluded;
    if (k > available)
        throw InputError("cannot sample " + std::to_string(k) + " negatives from " + std::to_string(available) + " candidates");
    std::vector<std::size_t> out;
    out.reserve(k);
    if (2 * k <= available) {
        std::unordered_set<std::size_t> taken;
        while (out.size() < k) {
            const std::size_t v = rng.index(num_items);
            if (exclusion.count(v) || !taken.insert(v).second) continue;
            out.push_back(v);
        }
        return out;
    }
    std::vector<std::size_t> candidates;
    candidates.reserve(available);
    for (std::size_t v = 0; v < num_items; ++v)
        if (!exclusion.count(v)) candidates.push_back(v);
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(candidates[i], candidates[i + rng.index(candidates.size() - i)]);
        out.push_back(candidates[i]);
    }
    return out;
}

inline std::vector<std::size_t> sample_ranking_negatives(std::size_t k, const std::unordered_set<std::size_t>& exclusion,
                                                         std::size_t num_items, std::uint64_t seed) {
    Rng rng(seed);
    return sample_ranking_negatives(k, exclusion, num_items, rng);
}

/// Runs parse-side output through threshold, core filter and split.
inline DatasetSplit ingest_records(const std::vector<RatingRecord>& records, const IngestConfig& cfg) {
    cfg.validate();
    auto filtered = iterative_core_filter(to_signed_records(records, cfg), cfg.min_interactions);
    if (filtered.empty()) throw EmptyResultError("no interactions left after filtering");
    return split_dataset(filtered, cfg);
}

// On-disk split layout: {train,validation,test}.tsv edge lists,
// users.tsv / items.tsv key maps (`key<TAB>index`), stats.json.

inline void write_split(const std::filesystem::path& dir, const DatasetSplit& split) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw InputError("cannot write " + (dir / name).string());
        return os;
    };
    {
        auto os = open("train.tsv");
        write_edge_list(os, split.train);
    }
    {
        auto os = open("validation.tsv");
        write_edge_list(os, split.validation);
    }
    {
        auto os = open("test.tsv");
        write_edge_list(os, split.test);
    }
    auto write_map = [&](const char* name, const std::vector<std::string>& keys) {
        auto os = open(name);
        for (std::size_t i = 0; i < keys.size(); ++i) os << keys[i] << '\t' << i << '\n';
    };
    write_map("users.tsv", split.user_keys);
    write_map("items.tsv", split.item_keys);
    auto os = open("stats.json");
    os << to_json(dataset_stats(split)).dump(2) << '\n';
}

inline DatasetSplit read_split(const std::filesystem::path& dir) {
    auto open = [&](const char* name) {
        std::ifstream is(dir / name, std::ios::binary);
        if (!is) throw InputError("cannot read " + (dir / name).string());
        return is;
    };
    DatasetSplit split;
    auto read_map = [&](const char* name) {
        auto is = open(name);
        std::vector<std::string> keys;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto tab = line.rfind('\t');
            if (tab == std::string::npos) throw InputError(std::string(name) + ": malformed map line");
            if (std::stoull(line.substr(tab + 1)) != keys.size()) throw InputError(std::string(name) + ": indices not dense");
            keys.push_back(line.substr(0, tab));
        }
        return keys;
    };
    split.user_keys = read_map("users.tsv");
    split.item_keys = read_map("items.tsv");
    {
        auto is = open("train.tsv");
        split.train = read_edge_list(is);
    }
    {
        auto is = open("validation.tsv");
        split.validation = read_edge_list(is);
    }
    {
        auto is = open("test.tsv");
        split.test = read_edge_list(is);
    }
    {
        std::ifstream is(dir / "stats.json");
        if (is) split.seed = nlohmann::json::parse(is).value("seed", std::uint64_t{0});
    }
    for (const auto& e : split.all_edges())
        if (e.user >= split.num_users() || e.item >= split.num_items()) throw InputError("split edge index out of range of key maps");
    return split;
}

} // namespace dfgnn
