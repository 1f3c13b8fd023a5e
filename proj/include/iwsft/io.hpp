// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "iwsft/policy.hpp"
#include "iwsft/trainer.hpp"
#include "iwsft/types.hpp"

namespace iwsft {

using json = nlohmann::json;

// Shortest representation that round-trips the double exactly.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Dataset files: one JSON header line, then one JSON line per trajectory.
// The content hash covers the canonical serialization of the body lines.
// ---------------------------------------------------------------------------

inline json action_space_to_json(const ActionSpace& space) {
    return {{"kind", space.kind == ActionSpace::Kind::Discrete ? "discrete" : "continuous"},
            {"dim", space.dim}};
}

inline ActionSpace action_space_from_json(const json& j) {
    ActionSpace space;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "discrete")
        space.kind = ActionSpace::Kind::Discrete;
    else if (kind == "continuous")
        space.kind = ActionSpace::Kind::Continuous;
    else
        throw std::runtime_error("unknown action space kind: " + kind);
    space.dim = j.at("dim").get<int>();
    return space;
}

inline std::string serialize_trajectory_line(const Trajectory& t, const ActionSpace& space) {
    json j;
    json states = json::array();
    json masks = json::array();
    for (const auto& s : t.steps) {
        for (double v : s.state) states.push_back(v);
        masks.push_back(s.mask ? 1 : 0);
    }
    j["states"] = std::move(states);
    j["masks"] = std::move(masks);
    if (space.kind == ActionSpace::Kind::Discrete) {
        json acts = json::array();
        for (const auto& s : t.steps) acts.push_back(discrete_action(s.action));
        j["actions"] = std::move(acts);
    } else {
        json acts = json::array();
        for (const auto& s : t.steps)
            for (double v : continuous_action(s.action)) acts.push_back(v);
        j["actions"] = std::move(acts);
    }
    j["ret"] = t.ret;
    return j.dump();
}

inline Trajectory parse_trajectory_line(const std::string& line, int state_dim,
                                        const ActionSpace& space) {
    const json j = json::parse(line);
    const auto& states = j.at("states");
    const auto& masks = j.at("masks");
    const auto& actions = j.at("actions");
    const std::size_t n_steps = masks.size();
    if (states.size() != n_steps * static_cast<std::size_t>(state_dim))
        throw std::runtime_error("trajectory line: states length mismatch");
    Trajectory t;
    t.ret = j.at("ret").get<double>();
    t.steps.reserve(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        Step s;
        s.state.reserve(state_dim);
        for (int d = 0; d < state_dim; ++d)
            s.state.push_back(states[i * state_dim + d].get<double>());
        const int m = masks[i].get<int>();
        if (m != 0 && m != 1) throw std::runtime_error("trajectory line: mask must be 0 or 1");
        s.mask = m == 1;
        if (space.kind == ActionSpace::Kind::Discrete) {
            if (actions.size() != n_steps) throw std::runtime_error("trajectory line: actions length mismatch");
            s.action = actions[i].get<int>();
        } else {
            if (actions.size() != n_steps * static_cast<std::size_t>(space.dim))
                throw std::runtime_error("trajectory line: actions length mismatch");
            std::vector<double> a(space.dim);
            for (int d = 0; d < space.dim; ++d)
                a[d] = actions[i * space.dim + d].get<double>();
            s.action = std::move(a);
        }
        t.steps.push_back(std::move(s));
    }
    return t;
}

inline std::string serialize_dataset_body(const TrajectoryDataset& ds) {
    std::string body;
    for (const auto& t : ds.trajectories) {
        body += serialize_trajectory_line(t, ds.action_space);
        body += '\n';
    }
    return body;
}

inline std::uint64_t dataset_content_hash(const TrajectoryDataset& ds) {
    return fnv1a64(serialize_dataset_body(ds));
}

inline void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
    validate_dataset(ds);
    json header{{"kind", "trajectory_dataset"},
                {"version", 1},
                {"state_dim", ds.state_dim},
                {"action_space", action_space_to_json(ds.action_space)},
                {"count", ds.trajectories.size()}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << header.dump() << '\n' << serialize_dataset_body(ds);
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline TrajectoryDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset file empty: " + path);
    const json header = json::parse(line);
    if (header.at("kind").get<std::string>() != "trajectory_dataset")
        throw std::runtime_error("not a trajectory dataset file: " + path);
    TrajectoryDataset ds;
    ds.state_dim = header.at("state_dim").get<int>();
    ds.action_space = action_space_from_json(header.at("action_space"));
    const auto count = header.at("count").get<std::size_t>();
    ds.trajectories.reserve(count);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ds.trajectories.push_back(parse_trajectory_line(line, ds.state_dim, ds.action_space));
    }
    if (ds.trajectories.size() != count)
        throw std::runtime_error("dataset trajectory count mismatch: " + path);
    validate_dataset(ds);
    return ds;
}

// ---------------------------------------------------------------------------
// Curated files: a single JSON object referencing the source dataset by path
// and canonical content hash.
// ---------------------------------------------------------------------------

struct CuratedFile {
    std::vector<CuratedEntry> entries;
    std::vector<double> cutoffs;
    std::string source_path;
    std::string source_hash;
};

inline void save_curated(const CuratedDataset& cd, const std::string& path,
                         const std::string& source_path) {
    validate_curated(cd);
    json entries = json::array();
    for (const auto& e : cd.entries) entries.push_back({e.index, e.multiplicity});
    json j{{"kind", "curated_dataset"},
           {"version", 1},
           {"cutoffs", cd.cutoffs},
           {"entries", std::move(entries)},
           {"source_path", source_path},
           {"source_hash", to_hex(dataset_content_hash(*cd.source))}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline CuratedFile load_curated_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open curated file: " + path);
    json j;
    in >> j;
    if (j.at("kind").get<std::string>() != "curated_dataset")
        throw std::runtime_error("not a curated dataset file: " + path);
    CuratedFile f;
    f.cutoffs = j.at("cutoffs").get<std::vector<double>>();
    f.source_path = j.at("source_path").get<std::string>();
    f.source_hash = j.at("source_hash").get<std::string>();
    for (const auto& e : j.at("entries"))
        f.entries.push_back({e.at(0).get<std::size_t>(), e.at(1).get<int>()});
    return f;
}

// Attach a loaded source dataset, verifying the recorded content hash.
inline CuratedDataset bind_curated(const CuratedFile& f,
                                   std::shared_ptr<const TrajectoryDataset> source) {
    if (!source) throw std::runtime_error("bind_curated: null source");
    const std::string h = to_hex(dataset_content_hash(*source));
    if (h != f.source_hash)
        throw std::runtime_error("curated file source hash mismatch (expected " + f.source_hash +
                                 ", dataset has " + h + ")");
    CuratedDataset cd{f.entries, f.cutoffs, std::move(source)};
    validate_curated(cd);
    return cd;
}

// ---------------------------------------------------------------------------
// Parameter checkpoints: JSON header line + raw little-endian float64 array.
// ---------------------------------------------------------------------------

inline json layout_to_json(const PolicyLayout& lay) {
    return {{"input_dim", lay.input_dim},
            {"hidden", lay.hidden},
            {"output_dim", lay.output_dim},
            {"head", lay.head == HeadKind::Categorical ? "categorical" : "gaussian"}};
}

inline PolicyLayout layout_from_json(const json& j) {
    PolicyLayout lay;
    lay.input_dim = j.at("input_dim").get<int>();
    lay.hidden = j.at("hidden").get<std::vector<int>>();
    lay.output_dim = j.at("output_dim").get<int>();
    const std::string head = j.at("head").get<std::string>();
    if (head == "categorical")
        lay.head = HeadKind::Categorical;
    else if (head == "gaussian")
        lay.head = HeadKind::Gaussian;
    else
        throw std::runtime_error("unknown head kind: " + head);
    lay.validate();
    return lay;
}

inline void save_params(const PolicyParams& p, const std::string& path) {
    check_param_shape(p);
    json header{{"kind", "policy_checkpoint"},
                {"version", 1},
                {"layout", layout_to_json(p.layout)},
                {"count", p.values.size()}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << header.dump() << '\n';
    for (double v : p.values) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
        out.write(bytes, 8);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline PolicyParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint file empty: " + path);
    const json header = json::parse(line);
    if (header.at("kind").get<std::string>() != "policy_checkpoint")
        throw std::runtime_error("not a policy checkpoint: " + path);
    PolicyParams p;
    p.layout = layout_from_json(header.at("layout"));
    const auto count = header.at("count").get<std::size_t>();
    if (count != p.layout.param_count())
        throw std::runtime_error("checkpoint count does not match layout: " + path);
    p.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        char bytes[8];
        in.read(bytes, 8);
        if (!in) throw std::runtime_error("checkpoint truncated: " + path);
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[k])) << (8 * k);
        p.values[i] = std::bit_cast<double>(bits);
    }
    check_param_shape(p);
    return p;
}

// ---------------------------------------------------------------------------
// Metrics CSV (RFC 4180: CRLF line endings, fixed header).
// ---------------------------------------------------------------------------

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string s = "step,loss,lr,grad_norm,w_mean,w_min,w_max\r\n";
    for (const auto& r : rows) {
        s += std::to_string(r.step);
        s += ',';
        s += format_double(r.loss);
        s += ',';
        s += format_double(r.lr);
        s += ',';
        s += format_double(r.grad_norm);
        s += ',';
        s += format_double(r.w_mean);
        s += ',';
        s += format_double(r.w_min);
        s += ',';
        s += format_double(r.w_max);
        s += "\r\n";
    }
    return s;
}

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << metrics_csv(rows);
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace iwsft
