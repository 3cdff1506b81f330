#pragma once

#include "decaylab/common.hpp"

#include <charconv>
#include <map>
#include <set>

namespace decaylab {

inline constexpr const char* tool_version = "1.0.0";
inline constexpr int config_schema_version = 1;

// `input.<name> = <kind> key=value ...`
struct InputSpec {
    std::string name;
    std::string kind;
    std::vector<std::pair<std::string, std::string>> args;  // in file order

    std::optional<std::string> arg(const std::string& key) const
    {
        for (auto& [k, v] : args)
            if (k == key) return v;
        return std::nullopt;
    }

    friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

struct ExperimentConfig {
    std::string experiment;
    int m = 0;  // nominal scale delta = 2^-m
    std::uint64_t seed = 0;
    int threads = 0;  // 0: all cores
    std::string output_dir;
    std::map<std::string, std::string> parameters;  // raw trimmed values
    std::vector<InputSpec> inputs;

    double delta() const { return dyadic(m); }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct ParseResult {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> errors;

    bool ok() const { return config.has_value(); }
};

namespace cfg {

inline std::string trim(std::string_view s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return std::string(s.substr(a, b - a + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

inline std::optional<double> to_real(const std::string& s)
{
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> to_int(const std::string& s)
{
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<std::vector<double>> to_reals(const std::string& s)
{
    std::vector<double> out;
    for (auto& part : split(s, ',')) {
        auto v = to_real(part);
        if (!v) return std::nullopt;
        out.push_back(*v);
    }
    if (out.empty()) return std::nullopt;
    return out;
}

inline std::optional<std::vector<std::int64_t>> to_ints(const std::string& s)
{
    std::vector<std::int64_t> out;
    for (auto& part : split(s, ',')) {
        auto v = to_int(part);
        if (!v) return std::nullopt;
        out.push_back(*v);
    }
    if (out.empty()) return std::nullopt;
    return out;
}

// `2^-k` or a decimal that is an exact power of two.
inline std::optional<int> dyadic_exponent_of(const std::string& s)
{
    if (s.rfind("2^-", 0) == 0) {
        auto k = to_int(s.substr(3));
        if (k && *k >= 0 && *k <= 60) return static_cast<int>(*k);
        return std::nullopt;
    }
    auto v = to_real(s);
    if (!v || !(*v > 0)) return std::nullopt;
    auto e = exact_log2(*v);
    if (!e || *e > 0) return std::nullopt;
    return -*e;
}

enum class Type { real, integer, reals, band, word, ints, dyadic };

struct Rule {
    Type type;
    double lo, hi;
    bool lo_open, hi_open;
};

// Parameter key -> rule. The `s` of induction is a list and is special-cased.
inline const std::map<std::string, Rule>& param_rules()
{
    static const std::map<std::string, Rule> r{
        {"s", {Type::real, 0, 1, true, false}},       {"t", {Type::real, 0, 1, true, false}},
        {"sigma", {Type::real, 0, 1, true, false}},   {"kappa", {Type::real, 0, 1, true, false}},
        {"eps", {Type::real, 0, 1, true, true}},      {"C0", {Type::real, 0, 1e9, true, false}},
        {"c", {Type::real, 0, 1, true, false}},       {"k_max", {Type::integer, 0, 8, false, false}},
        {"band", {Type::band, 1, 1e12, false, false}}, {"n_samples", {Type::integer, 3, 4096, false, false}},
        {"k", {Type::integer, 0, 4, false, false}},   {"tau", {Type::real, 0, 1, true, false}},
        {"C", {Type::real, 0, 1e9, true, false}},     {"r", {Type::dyadic, 0, 1, true, false}},
        {"example", {Type::word, 0, 0, false, false}}, {"schedule", {Type::ints, 2, 1e12, false, false}},
        {"copies", {Type::integer, 1, 4, false, false}},
    };
    return r;
}

struct ExperimentRule {
    std::vector<std::string> required;
    std::vector<std::string> optional;
    std::vector<std::string> input_names;  // empty with any_inputs false: no inputs
    bool any_inputs = false;
};

inline const std::map<std::string, ExperimentRule>& experiment_rules()
{
    static const std::map<std::string, ExperimentRule> r{
        {"base-case", {{"s", "t"}, {"band", "n_samples"}, {"mu", "nu"}, false}},
        {"decay", {{}, {"band", "n_samples"}, {}, true}},
        {"flatten", {{"s", "t"}, {"k_max", "kappa"}, {"mu", "nu"}, false}},
        {"level-sets", {{}, {"r"}, {"lambda"}, false}},
        {"induction", {{"s"}, {"k", "n_samples"}, {}, true}},
        {"iterated", {{"sigma"}, {"C0", "n_samples"}, {}, true}},
        {"keystep", {{"s", "t"}, {"C", "tau", "eps"}, {"mu", "nu"}, false}},
        {"project", {{"s", "t"}, {"c"}, {"a1", "a2", "y"}, false}},
        {"counterexample", {{"s"}, {"example", "c"}, {}, false}},
        {"hset", {{"s"}, {"schedule", "copies"}, {}, false}},
    };
    return r;
}

struct KindRule {
    std::vector<std::string> required;
    std::vector<std::string> optional;
};

inline const std::map<std::string, KindRule>& input_kinds()
{
    static const std::map<std::string, KindRule> r{
        {"uniform", {{"lo", "hi"}, {"level", "a", "b"}}},
        {"point", {{"x"}, {"level", "a", "b"}}},
        {"cantor", {{"D", "keep", "depth"}, {"seed", "a", "b"}}},
        {"file", {{"path"}, {"a", "b"}}},
        {"comb", {{"r", "c"}, {"level", "a", "b"}}},
        {"interval", {{"s", "c"}, {"a", "b"}}},
        {"hset", {{"s"}, {"schedule", "level", "a", "b"}}},
    };
    return r;
}

inline std::string range_text(const Rule& r)
{
    return cat(r.lo_open ? "(" : "[", r.lo, ",", r.hi, r.hi_open ? ")" : "]");
}

inline bool in_range(double v, const Rule& r)
{
    const bool lo = r.lo_open ? v > r.lo : v >= r.lo;
    const bool hi = r.hi_open ? v < r.hi : v <= r.hi;
    return lo && hi;
}

inline std::optional<std::string> check_param(const std::string& experiment, const std::string& key, const std::string& v)
{
    const Rule& r = param_rules().at(key);
    const std::string where = cat("parameter ", key, "=", v);
    if (experiment == "induction" && key == "s") {
        auto xs = to_reals(v);
        if (!xs) return where + ": expected a comma-separated list of reals";
        for (double x : *xs)
            if (!in_range(x, r)) return cat(where, ": every entry must lie in ", range_text(r));
        return std::nullopt;
    }
    switch (r.type) {
    case Type::real: {
        auto x = to_real(v);
        if (!x) return where + ": expected a real number";
        if (!in_range(*x, r)) {
            if (key == "sigma") return cat(where, ": sigma must lie in (0,1]");
            return cat(where, ": outside ", range_text(r));
        }
        return std::nullopt;
    }
    case Type::integer: {
        auto x = to_int(v);
        if (!x) return where + ": expected an integer";
        if (!in_range(static_cast<double>(*x), r)) return cat(where, ": outside ", range_text(r));
        return std::nullopt;
    }
    case Type::band: {
        auto p = split(v, ':');
        auto a = p.size() == 2 ? to_real(p[0]) : std::nullopt;
        auto b = p.size() == 2 ? to_real(p[1]) : std::nullopt;
        if (!a || !b) return where + ": expected lo:hi";
        if (!(*a >= 1.0 && *b > *a)) return where + ": need 1 <= lo < hi";
        return std::nullopt;
    }
    case Type::word:
        if (v != "L2" && v != "interval") return where + ": expected L2 or interval";
        return std::nullopt;
    case Type::ints: {
        auto xs = to_ints(v);
        if (!xs) return where + ": expected a comma-separated list of integers";
        for (std::size_t i = 0; i < xs->size(); ++i) {
            if ((*xs)[i] < 2) return where + ": entries must be >= 2";
            if (i > 0 && (*xs)[i] <= (*xs)[i - 1]) return where + ": entries must increase strictly";
        }
        return std::nullopt;
    }
    case Type::dyadic:
        if (!dyadic_exponent_of(v)) return where + ": expected a dyadic scale 2^-k <= 1";
        return std::nullopt;
    case Type::reals:
        break;
    }
    return std::nullopt;
}

inline std::optional<std::string> check_input(const InputSpec& in)
{
    const std::string where = cat("input.", in.name);
    auto it = input_kinds().find(in.kind);
    if (it == input_kinds().end()) return cat(where, ": unknown kind '", in.kind, "'");
    const KindRule& k = it->second;
    std::set<std::string> seen;
    for (auto& [key, v] : in.args) {
        if (!seen.insert(key).second) return cat(where, ": argument ", key, " given twice");
        const bool known = std::find(k.required.begin(), k.required.end(), key) != k.required.end() ||
                           std::find(k.optional.begin(), k.optional.end(), key) != k.optional.end();
        if (!known) return cat(where, ": unknown argument '", key, "' for kind ", in.kind);
        const bool numeric = key != "path" && key != "keep" && key != "schedule";
        if (numeric && !to_real(v)) return cat(where, ": argument ", key, "=", v, " is not a number");
        if ((key == "level" || key == "D" || key == "depth" || key == "seed") && !to_int(v))
            return cat(where, ": argument ", key, "=", v, " is not an integer");
        if ((key == "keep" || key == "schedule") && !to_ints(v)) return cat(where, ": argument ", key, "=", v, " is not an integer list");
        if (key == "a" && *to_real(v) == 0.0) return where + ": scale a must be nonzero";
    }
    for (auto& key : k.required)
        if (!seen.count(key)) return cat(where, ": kind ", in.kind, " needs argument ", key);
    return std::nullopt;
}

inline bool is_top_key(const std::string& k)
{
    return k == "experiment" || k == "m" || k == "delta" || k == "seed" || k == "threads" || k == "output_dir";
}

}  // namespace cfg

// Inputs the iterated experiment needs: 2 ceil(C0 / sigma).
inline int iterated_inputs_needed(double sigma, double C0) { return 2 * static_cast<int>(std::ceil(C0 / sigma - 1e-12)); }

// Flat `key = value` lines; `#` starts a comment line. Overrides replace the
// value of an existing key or add it. Every violation is collected.
inline ParseResult parse_config(const std::string& text, const std::vector<std::string>& overrides = {})
{
    struct Entry {
        std::string value;
        int line;
    };
    ParseResult res;
    auto& err = res.errors;
    std::map<std::string, Entry> entries;
    std::vector<std::string> input_order;

    auto add = [&](const std::string& raw, int line, bool replace) {
        const auto eq = raw.find('=');
        const std::string where = line > 0 ? cat("line ", line) : cat("override '", raw, "'");
        if (eq == std::string::npos) {
            err.push_back(cat(where, ": expected key = value"));
            return;
        }
        const std::string key = cfg::trim(std::string_view(raw).substr(0, eq));
        const std::string value = cfg::trim(std::string_view(raw).substr(eq + 1));
        if (key.empty()) {
            err.push_back(cat(where, ": empty key"));
            return;
        }
        if (value.empty()) {
            err.push_back(cat(where, ": empty value for ", key));
            return;
        }
        auto it = entries.find(key);
        if (it != entries.end() && !replace) {
            err.push_back(cat("duplicate key '", key, "' at lines ", it->second.line, " and ", line));
            return;
        }
        if (it == entries.end() && key.rfind("input.", 0) == 0) input_order.push_back(key);
        entries[key] = {value, line};
    };

    std::istringstream is(text);
    std::string line;
    for (int n = 1; std::getline(is, line); ++n) {
        const std::string t = cfg::trim(line);
        if (t.empty() || t[0] == '#') continue;
        add(t, n, false);
    }
    for (auto& o : overrides) add(o, 0, true);

    ExperimentConfig c;
    auto get = [&](const std::string& k) -> const Entry* {
        auto it = entries.find(k);
        return it == entries.end() ? nullptr : &it->second;
    };

    const cfg::ExperimentRule* rule = nullptr;
    if (auto e = get("experiment")) {
        auto it = cfg::experiment_rules().find(e->value);
        if (it == cfg::experiment_rules().end()) {
            std::string names;
            for (auto& [k, v] : cfg::experiment_rules()) names += (names.empty() ? "" : ", ") + k;
            err.push_back(cat("unknown experiment '", e->value, "' (expected one of ", names, ")"));
        } else {
            c.experiment = e->value;
            rule = &it->second;
        }
    } else {
        err.push_back("missing key 'experiment'");
    }

    const Entry* em = get("m");
    const Entry* ed = get("delta");
    if (em && ed) {
        err.push_back("give the scale as either m or delta, not both");
    } else if (em) {
        auto v = cfg::to_int(em->value);
        if (!v || *v < 1 || *v > 24) err.push_back(cat("scale m=", em->value, " must be an integer in [1,24]"));
        else c.m = static_cast<int>(*v);
    } else if (ed) {
        auto k = cfg::dyadic_exponent_of(ed->value);
        if (!k || *k < 1 || *k > 24) err.push_back(cat("scale delta=", ed->value, " is not a dyadic 2^-m with m in [1,24]"));
        else c.m = *k;
    } else {
        err.push_back("missing scale: give m or delta");
    }

    if (auto e = get("seed")) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
        if (ec != std::errc{} || p != e->value.data() + e->value.size()) err.push_back(cat("seed=", e->value, " is not an unsigned integer"));
        else c.seed = v;
    }
    if (auto e = get("threads")) {
        auto v = cfg::to_int(e->value);
        if (!v || *v < 0 || *v > 4096) err.push_back(cat("threads=", e->value, " must be an integer in [0,4096]"));
        else c.threads = static_cast<int>(*v);
    }
    if (auto e = get("output_dir")) c.output_dir = e->value;

    for (auto& [key, e] : entries) {
        if (cfg::is_top_key(key) || key.rfind("input.", 0) == 0) continue;
        if (!cfg::param_rules().count(key)) {
            err.push_back(cat("unknown key '", key, "'", e.line > 0 ? cat(" at line ", e.line) : std::string{}));
            continue;
        }
        if (rule && std::find(rule->required.begin(), rule->required.end(), key) == rule->required.end() &&
            std::find(rule->optional.begin(), rule->optional.end(), key) == rule->optional.end()) {
            err.push_back(cat("parameter '", key, "' is not used by experiment ", c.experiment));
            continue;
        }
        if (auto bad = cfg::check_param(c.experiment, key, e.value)) err.push_back(*bad);
        c.parameters[key] = e.value;
    }
    if (rule)
        for (auto& key : rule->required)
            if (!entries.count(key)) err.push_back(cat("experiment ", c.experiment, " needs parameter ", key));

    for (auto& key : input_order) {
        const Entry& e = entries.at(key);
        InputSpec in;
        in.name = key.substr(6);
        std::istringstream ws(e.value);
        ws >> in.kind;
        std::string tok;
        bool bad = false;
        while (ws >> tok) {
            const auto q = tok.find('=');
            if (q == std::string::npos || q == 0 || q + 1 == tok.size()) {
                err.push_back(cat(key, ": expected key=value, got '", tok, "'"));
                bad = true;
                break;
            }
            in.args.emplace_back(tok.substr(0, q), tok.substr(q + 1));
        }
        if (bad) continue;
        if (in.name.empty()) {
            err.push_back(cat(key, ": empty input name"));
            continue;
        }
        if (rule && !rule->any_inputs &&
            std::find(rule->input_names.begin(), rule->input_names.end(), in.name) == rule->input_names.end()) {
            std::string names;
            for (auto& n : rule->input_names) names += (names.empty() ? "" : ", ") + n;
            err.push_back(rule->input_names.empty() ? cat("experiment ", c.experiment, " takes no inputs (got ", key, ")")
                                                    : cat("experiment ", c.experiment, " has no input '", in.name, "' (expected ", names, ")"));
            continue;
        }
        if (auto b = cfg::check_input(in)) err.push_back(*b);
        c.inputs.push_back(std::move(in));
    }

    // Cross-field rules.
    auto preal = [&](const char* k) -> std::optional<double> {
        auto it = c.parameters.find(k);
        return it == c.parameters.end() ? std::nullopt : cfg::to_real(it->second);
    };
    if (c.experiment == "induction") {
        const std::size_t n = c.inputs.empty() ? 3 : c.inputs.size();
        if (n < 3) err.push_back(cat("induction needs at least 3 inputs, got ", n));
        if (auto it = c.parameters.find("s"); it != c.parameters.end())
            if (auto xs = cfg::to_reals(it->second)) {
                if (xs->size() != n) err.push_back(cat("induction: parameter s lists ", xs->size(), " exponents for ", n, " inputs"));
                double sum = 0.0;
                for (double x : *xs) sum += x;
                if (!(sum > 1.0)) err.push_back(cat("induction: exponents sum to ", sum, "; need more than 1"));
            }
    }
    if (c.experiment == "iterated") {
        auto sg = preal("sigma");
        const double C0 = preal("C0").value_or(2.0);
        if (sg && *sg > 0 && *sg <= 1 && !c.inputs.empty()) {
            const int need = iterated_inputs_needed(*sg, C0);
            if (static_cast<int>(c.inputs.size()) < need)
                err.push_back(cat("iterated needs at least ", need, " inputs for sigma=", *sg, ", C0=", C0, "; got ", c.inputs.size()));
        }
    }
    if (c.experiment == "flatten") {
        auto s = preal("s"), t = preal("t");
        if (s && t && *s + *t > 1.0 + 1e-12) err.push_back(cat("flatten needs s + t <= 1, got ", *s + *t));
    }
    if (c.experiment == "project") {
        bool a1 = false, a2 = false;
        for (auto& in : c.inputs) a1 |= in.name == "a1", a2 |= in.name == "a2";
        if (a1 != a2) err.push_back("project: give both a1 and a2 or neither");
        if (!a1 && c.m % 2 != 0) err.push_back(cat("project: the default Cantor battery needs an even m, got ", c.m));
    }
    if (c.experiment == "counterexample") {
        const bool l2 = c.parameters.count("example") == 0 || c.parameters.at("example") == "L2";
        if (auto s = preal("s"); s && l2 && !(*s < 0.5)) err.push_back(cat("counterexample L2 needs s < 1/2, got ", *s));
        if (auto s = preal("s"); s && !l2 && !(*s < 2.0 / 3.0)) err.push_back(cat("counterexample interval needs s < 2/3, got ", *s));
    }

    if (err.empty()) res.config = std::move(c);
    return res;
}

// Canonical text; parse_config(serialize(c)) == c.
inline std::string serialize(const ExperimentConfig& c)
{
    std::ostringstream os;
    os << "experiment = " << c.experiment << '\n' << "m = " << c.m << '\n' << "seed = " << c.seed << '\n';
    if (c.threads != 0) os << "threads = " << c.threads << '\n';
    if (!c.output_dir.empty()) os << "output_dir = " << c.output_dir << '\n';
    for (auto& [k, v] : c.parameters) os << k << " = " << v << '\n';
    for (auto& in : c.inputs) {
        os << "input." << in.name << " = " << in.kind;
        for (auto& [k, v] : in.args) os << ' ' << k << '=' << v;
        os << '\n';
    }
    return os.str();
}

}  // namespace decaylab
