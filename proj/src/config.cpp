#include "mctdvp/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace mctdvp {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream in(s);
    while (std::getline(in, token, ',')) {
        token = trim(token);
        if (!token.empty()) out.push_back(token);
    }
    return out;
}

struct Entry {
    std::string value;
    int line;
    bool used = false;
};

struct Parsed {
    std::string file;
    std::map<std::string, std::map<std::string, Entry>> sections;
    std::map<std::string, int> section_lines;
};

class Reader {
public:
    Reader(Parsed parsed) : parsed_(std::move(parsed)) {}

    bool has(const std::string& section, const std::string& key) {
        auto s = parsed_.sections.find(section);
        if (s == parsed_.sections.end()) return false;
        return s->second.count(key) > 0;
    }

    std::string require(const std::string& section, const std::string& key) {
        auto s = parsed_.sections.find(section);
        if (s == parsed_.sections.end())
            throw ConfigError(parsed_.file, 0, "missing section [" + section +
                                                   "] (required for key '" + key + "')");
        auto k = s->second.find(key);
        if (k == s->second.end())
            throw ConfigError(parsed_.file, parsed_.section_lines[section],
                              "missing key '" + key + "' in section [" + section + "]");
        k->second.used = true;
        return k->second.value;
    }

    std::string optional(const std::string& section, const std::string& key,
                         const std::string& fallback) {
        if (!has(section, key)) return fallback;
        return require(section, key);
    }

    double require_double(const std::string& section, const std::string& key) {
        return parse_double(section, key, require(section, key));
    }

    double optional_double(const std::string& section, const std::string& key,
                           double fallback) {
        if (!has(section, key)) return fallback;
        return require_double(section, key);
    }

    std::int64_t require_int(const std::string& section, const std::string& key) {
        return parse_int(section, key, require(section, key));
    }

    std::int64_t optional_int(const std::string& section, const std::string& key,
                              std::int64_t fallback) {
        if (!has(section, key)) return fallback;
        return require_int(section, key);
    }

    std::uint64_t optional_u64(const std::string& section, const std::string& key,
                               std::uint64_t fallback) {
        if (!has(section, key)) return fallback;
        const std::string text = require(section, key);
        try {
            return std::stoull(text);
        } catch (const std::exception&) {
            throw ConfigError(parsed_.file, line_of(section, key),
                              "key '" + key + "' expects an unsigned integer, got '" +
                                  text + "'");
        }
    }

    bool optional_bool(const std::string& section, const std::string& key, bool fallback) {
        if (!has(section, key)) return fallback;
        const std::string text = require(section, key);
        if (text == "true" || text == "1" || text == "yes") return true;
        if (text == "false" || text == "0" || text == "no") return false;
        throw ConfigError(parsed_.file, line_of(section, key),
                          "key '" + key + "' expects true/false, got '" + text + "'");
    }

    int line_of(const std::string& section, const std::string& key) {
        auto s = parsed_.sections.find(section);
        if (s == parsed_.sections.end()) return 0;
        auto k = s->second.find(key);
        return k == s->second.end() ? 0 : k->second.line;
    }

    void reject_unused() {
        static const std::map<std::string, bool> known_sections = {
            {"model", true},      {"dissipation", true}, {"initial", true},
            {"simulation", true}, {"observables", true}, {"output", true}};
        for (const auto& [name, entries] : parsed_.sections) {
            if (!known_sections.count(name))
                throw ConfigError(parsed_.file, parsed_.section_lines[name],
                                  "unknown section [" + name + "]");
            for (const auto& [key, entry] : entries)
                if (!entry.used)
                    throw ConfigError(parsed_.file, entry.line,
                                      "unknown key '" + key + "' in section [" + name + "]");
        }
    }

    const std::string& file() const { return parsed_.file; }

private:
    double parse_double(const std::string& section, const std::string& key,
                        const std::string& text) {
        try {
            size_t pos = 0;
            const double v = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(parsed_.file, line_of(section, key),
                              "key '" + key + "' expects a number, got '" + text + "'");
        }
    }

    std::int64_t parse_int(const std::string& section, const std::string& key,
                           const std::string& text) {
        try {
            size_t pos = 0;
            const long long v = std::stoll(text, &pos);
            if (pos != text.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(parsed_.file, line_of(section, key),
                              "key '" + key + "' expects an integer, got '" + text + "'");
        }
    }

    Parsed parsed_;
};

Parsed parse_sections(const std::string& text, const std::string& file_name) {
    Parsed parsed;
    parsed.file = file_name;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(file_name, line_no, "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(file_name, line_no, "empty section name");
            parsed.section_lines.emplace(section, line_no);
            parsed.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(file_name, line_no, "expected 'key = value'");
        if (section.empty())
            throw ConfigError(file_name, line_no, "key outside of any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(file_name, line_no, "empty key");
        if (!parsed.sections[section].emplace(key, Entry{value, line_no}).second)
            throw ConfigError(file_name, line_no,
                              "duplicate key '" + key + "' in section [" + section + "]");
    }
    return parsed;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& file_name) {
    Reader reader(parse_sections(text, file_name));
    RunConfig cfg;

    cfg.model_type = reader.require("model", "type");
    if (cfg.model_type != "kxz" && cfg.model_type != "xxz" && cfg.model_type != "none")
        throw ConfigError(reader.file(), reader.line_of("model", "type"),
                          "model type must be kxz, xxz or none");
    cfg.n_sites = static_cast<int>(reader.require_int("model", "n_sites"));
    if (cfg.n_sites < 1)
        throw ConfigError(reader.file(), reader.line_of("model", "n_sites"),
                          "n_sites must be >= 1");
    cfg.epsilon = reader.optional_double("model", "epsilon", 1.0);
    cfg.lambda = reader.optional_double("model", "lambda", 0.0);

    cfg.dissipation_preset = reader.optional("dissipation", "preset", "");
    if (reader.has("dissipation", "channels"))
        cfg.channel_tokens = split_list(reader.require("dissipation", "channels"));
    if (!cfg.dissipation_preset.empty() && !cfg.channel_tokens.empty())
        throw ConfigError(reader.file(), reader.line_of("dissipation", "channels"),
                          "give either 'preset' or 'channels', not both");

    cfg.initial_kind = reader.optional("initial", "kind", "product");
    if (cfg.initial_kind != "product" && cfg.initial_kind != "random")
        throw ConfigError(reader.file(), reader.line_of("initial", "kind"),
                          "initial kind must be product or random");
    if (cfg.initial_kind == "product") {
        cfg.pattern = split_list(reader.optional("initial", "pattern", "up"));
    } else {
        cfg.initial_seed = reader.optional_u64("initial", "seed", 1);
        cfg.per_sample_initial = reader.optional_bool("initial", "per_sample", false);
        cfg.initial_bond_dim =
            static_cast<int>(reader.optional_int("initial", "bond_dim", 0));
        if (reader.has("initial", "bond_dim") && cfg.initial_bond_dim < 1)
            throw ConfigError(reader.file(), reader.line_of("initial", "bond_dim"),
                              "bond_dim must be >= 1");
    }

    cfg.dt = reader.require_double("simulation", "dt");
    cfg.t_final = reader.require_double("simulation", "t_final");
    if (!(cfg.dt > 0.0))
        throw ConfigError(reader.file(), reader.line_of("simulation", "dt"),
                          "dt must be positive");
    if (!(cfg.t_final >= cfg.dt))
        throw ConfigError(reader.file(), reader.line_of("simulation", "t_final"),
                          "t_final must be >= dt");
    cfg.n_samples = reader.optional_u64("simulation", "n_samples", 1);
    if (cfg.n_samples < 1)
        throw ConfigError(reader.file(), reader.line_of("simulation", "n_samples"),
                          "n_samples must be >= 1");
    cfg.bond_dim = static_cast<int>(reader.optional_int("simulation", "bond_dim", 1));
    if (cfg.bond_dim < 1)
        throw ConfigError(reader.file(), reader.line_of("simulation", "bond_dim"),
                          "bond_dim must be >= 1");
    cfg.master_seed = reader.optional_u64("simulation", "master_seed", 1);
    cfg.n_workers = static_cast<int>(reader.optional_int("simulation", "n_workers", 1));
    if (cfg.n_workers < 1)
        throw ConfigError(reader.file(), reader.line_of("simulation", "n_workers"),
                          "n_workers must be >= 1");
    cfg.record_every = static_cast<int>(reader.optional_int("simulation", "record_every", 1));
    if (cfg.record_every < 1)
        throw ConfigError(reader.file(), reader.line_of("simulation", "record_every"),
                          "record_every must be >= 1");
    cfg.resample_failed = reader.optional_bool("simulation", "resample_failed", false);
    cfg.pinv_cutoff =
        reader.optional_double("simulation", "pinv_cutoff", kDefaultPinvCutoff);

    cfg.observable_tokens = split_list(reader.optional("observables", "list", "sz_profile"));
    if (cfg.observable_tokens.empty())
        throw ConfigError(reader.file(), reader.line_of("observables", "list"),
                          "observable list is empty");

    cfg.output_dir = reader.optional("output", "directory", ".");

    reader.reject_unused();

    // Validate the assembled pieces now so errors surface as config errors.
    try {
        cfg.build_model();
        cfg.build_initial();
        cfg.parse_observables();
    } catch (const InvalidInput& e) {
        throw ConfigError(reader.file(), 0, e.what());
    } catch (const CapExceeded& e) {
        throw ConfigError(reader.file(), 0, e.what());
    }
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open config file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config_text(buffer.str(), path);
}

LindbladModel RunConfig::build_model() const {
    LindbladModel model;
    if (model_type == "kxz") {
        model = build_kxz(n_sites, lambda);
    } else if (model_type == "xxz") {
        model = build_xxz(n_sites, epsilon, lambda);
    } else {
        model.n_sites = n_sites;
        model.phys_dim = 2;
        model.name = "none";
    }
    if (!dissipation_preset.empty()) {
        model.lindblad_ops = mctdvp::dissipation_preset(
            dissipation_kind_from_name(dissipation_preset), n_sites);
    }
    for (const auto& token : channel_tokens) {
        const auto at = token.find('@');
        if (at == std::string::npos)
            throw InvalidInput("dissipation channel '" + token + "': expected <op>@<site>");
        const std::string op = token.substr(0, at);
        int site = 0;
        try {
            site = std::stoi(token.substr(at + 1));
        } catch (const std::exception&) {
            throw InvalidInput("dissipation channel '" + token + "': bad site");
        }
        if (site < 1 || site > n_sites)
            throw InvalidInput("dissipation channel '" + token + "': site out of range");
        model.lindblad_ops.push_back({pauli::by_name(op), site});
    }
    return model;
}

InitialStateSpec RunConfig::build_initial() const {
    InitialStateSpec spec;
    if (initial_kind == "product") {
        spec.kind = InitialStateSpec::Kind::Product;
        std::vector<std::string> tokens = pattern;
        if (tokens.size() == 1 && n_sites > 1)
            tokens.assign(static_cast<size_t>(n_sites), tokens[0]);
        if (tokens.size() != static_cast<size_t>(n_sites))
            throw InvalidInput("initial pattern needs one token per site (or a single "
                               "token for all sites)");
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        for (const auto& token : tokens) {
            ComplexVector ket(2);
            if (token == "up")
                ket << 1, 0;
            else if (token == "down")
                ket << 0, 1;
            else if (token == "plus")
                ket << inv_sqrt2, inv_sqrt2;
            else if (token == "minus")
                ket << inv_sqrt2, -inv_sqrt2;
            else
                throw InvalidInput("initial pattern token '" + token +
                                   "' (want up/down/plus/minus)");
            spec.kets.push_back(std::move(ket));
        }
    } else {
        spec.kind = InitialStateSpec::Kind::Random;
        spec.bond_dim = initial_bond_dim > 0 ? initial_bond_dim : bond_dim;
        spec.seed = initial_seed;
        spec.per_sample = per_sample_initial;
    }
    return spec;
}

TrajectoryConfig RunConfig::build_trajectory_config() const {
    TrajectoryConfig cfg;
    cfg.dt = dt;
    cfg.t_final = t_final;
    cfg.seed = master_seed;
    cfg.record_every = record_every;
    cfg.pinv_cutoff = pinv_cutoff;
    cfg.observables = parse_observables();
    return cfg;
}

std::vector<ObservableSpec> RunConfig::parse_observables() const {
    std::vector<ObservableSpec> specs;
    for (const auto& token : observable_tokens) specs.push_back(ObservableSpec::parse(token));
    return specs;
}

}  // namespace mctdvp
