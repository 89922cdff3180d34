#pragma once

// Serialization: geometry JSON round-trip, RFC-4180 CSV emission with a
// reproducibility comment header (tool version, canonical config hash, seed),
// 17-significant-digit number formatting, and config navigation that reports
// errors by JSON pointer.
//
// Requires the single-header nlohmann json (vendored, on the include path of
// the tool and test targets only; the core library headers stay independent).

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "geometry.hpp"
#include "util.hpp"
#include "version.hpp"

namespace rydssh::io {

using nlohmann::json;

// shortest round-trippable decimal form
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// canonical form: nlohmann objects iterate in sorted key order, so a compact
// dump is already canonical; volatile keys (timestamps) must not be present
inline std::uint64_t config_hash(const json& config) { return fnv1a64(config.dump()); }

// ---------------------------------------------------------------------------
// geometry JSON

inline json geometry_to_json(const chain_geometry& g) {
    json sites = json::array();
    for (const auto& s : g.sites)
        sites.push_back({{"x_um", s.x_um},
                         {"y_um", s.y_um},
                         {"sublattice", s.sublattice == sublattice_tag::A ? "A" : "B"}});
    return json{{"sites", std::move(sites)},
                {"axis_deg", g.axis_angle_rad * 180.0 / pi},
                {"d2_mhz_um3", g.d2_mhz_um3}};
}

inline chain_geometry geometry_from_json(const json& j) {
    chain_geometry g;
    if (!j.is_object() || !j.contains("sites") || !j["sites"].is_array())
        throw config_error("/sites: expected an array of site objects");
    g.axis_angle_rad = j.value("axis_deg", 0.0) * pi / 180.0;
    g.d2_mhz_um3 = j.value("d2_mhz_um3", chain_geometry{}.d2_mhz_um3);
    int k = 0;
    for (const auto& s : j["sites"]) {
        const std::string where = "/sites/" + std::to_string(k++);
        if (!s.is_object() || !s.contains("x_um") || !s.contains("y_um"))
            throw config_error(where + ": expected {x_um, y_um, sublattice}");
        const std::string tag = s.value("sublattice", "A");
        if (tag != "A" && tag != "B")
            throw config_error(where + "/sublattice: expected \"A\" or \"B\"");
        g.sites.push_back({s["x_um"].get<double>(), s["y_um"].get<double>(),
                           tag == "A" ? sublattice_tag::A : sublattice_tag::B});
    }
    return g;
}

// ---------------------------------------------------------------------------
// CSV

struct csv_metadata {
    std::uint64_t config_hash = 0;
    std::optional<std::uint64_t> seed;
};

class csv_writer {
  public:
    csv_writer(std::ostream& os, const std::vector<std::string>& header,
               const csv_metadata& meta)
        : os_(os), columns_(header.size()) {
        os_ << "# tool: rydssh " << RYDSSH_VERSION_STRING << "\r\n";
        char buf[24];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(meta.config_hash));
        os_ << "# config_hash: " << buf << "\r\n";
        if (meta.seed) os_ << "# seed: " << *meta.seed << "\r\n";
        write_row(header);
    }

    void write_row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_)
            throw std::invalid_argument("csv_writer: column count mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << quoted(cells[i]);
        }
        os_ << "\r\n";
    }

  private:
    static std::string quoted(const std::string& cell) {
        if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
        std::string out = "\"";
        for (char c : cell) {
            if (c == '"') out += '"';
            out += c;
        }
        out += '"';
        return out;
    }

    std::ostream& os_;
    std::size_t columns_;
};

// ---------------------------------------------------------------------------
// config navigation with JSON-pointer diagnostics

class config_view {
  public:
    explicit config_view(const json& j, std::string path = "") : j_(&j), path_(std::move(path)) {}

    const json& raw() const { return *j_; }
    const std::string& where() const { return path_; }

    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    config_view at(const std::string& key) const {
        if (!j_->is_object() || !j_->contains(key))
            throw config_error(path_ + "/" + key + ": missing required key");
        return config_view((*j_)[key], path_ + "/" + key);
    }

    config_view at(std::size_t index) const {
        if (!j_->is_array() || index >= j_->size())
            throw config_error(path_ + "/" + std::to_string(index) + ": missing array element");
        return config_view((*j_)[index], path_ + "/" + std::to_string(index));
    }

    std::size_t size() const { return j_->is_array() ? j_->size() : 0; }

    double number() const {
        if (!j_->is_number()) throw config_error(path_ + ": expected a number");
        return j_->get<double>();
    }
    double number(const std::string& key, std::optional<double> fallback = {}) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw config_error(path_ + "/" + key + ": missing required number");
        }
        return at(key).number();
    }

    std::int64_t integer() const {
        if (!j_->is_number_integer()) throw config_error(path_ + ": expected an integer");
        return j_->get<std::int64_t>();
    }
    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = {}) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw config_error(path_ + "/" + key + ": missing required integer");
        }
        return at(key).integer();
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        if (!(*j_)[key].is_boolean())
            throw config_error(path_ + "/" + key + ": expected a boolean");
        return (*j_)[key].get<bool>();
    }

    std::string text() const {
        if (!j_->is_string()) throw config_error(path_ + ": expected a string");
        return j_->get<std::string>();
    }
    std::string text(const std::string& key, std::optional<std::string> fallback = {}) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw config_error(path_ + "/" + key + ": missing required string");
        }
        return at(key).text();
    }

    std::vector<double> number_array(const std::string& key) const {
        const config_view arr = at(key);
        if (!arr.raw().is_array())
            throw config_error(arr.where() + ": expected an array of numbers");
        std::vector<double> out;
        out.reserve(arr.raw().size());
        for (std::size_t i = 0; i < arr.raw().size(); ++i) out.push_back(arr.at(i).number());
        return out;
    }

  private:
    const json* j_;
    std::string path_;
};

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(path + ": cannot open file");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw config_error(path + ": " + e.what());
    }
    return j;
}

} // namespace rydssh::io
