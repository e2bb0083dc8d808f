#pragma once

#include "core.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace halledge {

// Flat view of a sectioned key-value file: "section.key" -> list of values.
// Parsing is delegated to CLI11's config reader (TOML-style arrays allowed).
class KeyValueFile {
public:
    static KeyValueFile parse(std::istream& is)
    {
        KeyValueFile f;
        CLI::ConfigTOML reader;
        std::vector<CLI::ConfigItem> items;
        try {
            items = reader.from_config(is);
        } catch (const std::exception& e) {
            throw Error(ErrorKind::config, std::string("malformed config: ") + e.what());
        }
        for (const auto& it : items) {
            if (it.name == "++" || it.name == "--") continue;
            f.values_[it.fullname()] = it.inputs;
        }
        return f;
    }

    static KeyValueFile parse_file(const std::string& path)
    {
        std::ifstream in(path);
        require(in.good(), ErrorKind::config, "cannot open config file " + path);
        return parse(in);
    }

    static KeyValueFile parse_string(const std::string& text)
    {
        std::istringstream in(text);
        return parse(in);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, std::vector<std::string> values) { values_[key] = std::move(values); }

    const std::map<std::string, std::vector<std::string>>& entries() const { return values_; }

    std::vector<std::string> keys() const
    {
        std::vector<std::string> k;
        for (const auto& [name, v] : values_) k.push_back(name);
        return k;
    }

    std::string get_string(const std::string& key, const std::string& def) const
    {
        auto it = values_.find(key);
        if (it == values_.end() || it->second.empty()) return def;
        return it->second.front();
    }

    double get_double(const std::string& key, double def) const
    {
        auto it = values_.find(key);
        if (it == values_.end() || it->second.empty()) return def;
        return to_double(key, it->second.front());
    }

    long get_int(const std::string& key, long def) const
    {
        auto it = values_.find(key);
        if (it == values_.end() || it->second.empty()) return def;
        try {
            std::size_t pos = 0;
            long v = std::stol(it->second.front(), &pos);
            if (pos != it->second.front().size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorKind::config, "key " + key + " expects an integer, got '" + it->second.front() + "'");
        }
    }

    bool get_bool(const std::string& key, bool def) const
    {
        auto s = get_string(key, def ? "true" : "false");
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw Error(ErrorKind::config, "key " + key + " expects a boolean, got '" + s + "'");
    }

    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def) const
    {
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::vector<double> out;
        for (const auto& s : it->second) out.push_back(to_double(key, s));
        return out;
    }

private:
    static double to_double(const std::string& key, const std::string& s)
    {
        try {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorKind::config, "key " + key + " expects a number, got '" + s + "'");
        }
    }

    std::map<std::string, std::vector<std::string>> values_;
};

} // namespace halledge
