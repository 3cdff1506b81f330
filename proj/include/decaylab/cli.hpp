#pragma once

#include "decaylab/config.hpp"
#include "decaylab/flattening_lab.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace decaylab {

using json = nlohmann::ordered_json;

// A side table or sidecar written next to the report.
struct OutputFile {
    std::string name;
    std::string content;
};

struct RunReport {
    ExperimentConfig config;
    std::vector<std::string> overrides;
    json effective;  // parameters after defaults
    std::vector<Verdict> verdicts;
    json results = json::object();
    std::vector<OutputFile> files;
    std::vector<std::pair<std::string, double>> timings;  // stage -> seconds; kept out of the report
    int exit_code = 0;
};

// Test seam: the base-case order check can be replaced.
struct DispatchHooks {
    std::function<OrderCheck(const GridMeasure&, const GridMeasure&, double)> order_check;
};

// 1 if any exact verdict failed, else 0.
inline int exit_code_for(const std::vector<Verdict>& vs)
{
    for (auto& v : vs)
        if (v.exact && v.status == "fail") return 1;
    return 0;
}

namespace io {

// Non-finite values become strings so the report stays valid JSON.
inline json num(double v)
{
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline json nums(const std::vector<double>& v)
{
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Csv {
public:
    explicit Csv(std::initializer_list<std::string> cols)
    {
        bool first = true;
        for (auto& c : cols) os_ << (first ? "" : ",") << c, first = false;
        os_ << '\n';
    }

    template <class... T>
    void row(const T&... v)
    {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(v), first = false), ...);
        os_ << '\n';
    }

    std::string str() const { return os_.str(); }

private:
    static std::string cell(double v) { return fmt(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I v) { return std::to_string(v); }
    std::ostringstream os_;
};

inline void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error(cat("cannot open ", tmp.string(), " for writing"));
        f << content;
        f.flush();
        if (!f) throw std::runtime_error(cat("write to ", tmp.string(), " failed"));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw std::runtime_error(cat("cannot rename ", tmp.string(), " to ", path.string(), ": ", ec.message()));
}

}  // namespace io

// ---- parameters with defaults ----------------------------------------------

class Params {
public:
    Params(const ExperimentConfig& c, json& echo) : c_(c), echo_(echo) {}

    double real(const std::string& k, double fallback)
    {
        auto it = c_.parameters.find(k);
        const double v = it == c_.parameters.end() ? fallback : *cfg::to_real(it->second);
        echo_[k] = io::num(v);
        return v;
    }
    double real(const std::string& k) { return real(k, std::numeric_limits<double>::quiet_NaN()); }

    int integer(const std::string& k, int fallback)
    {
        auto it = c_.parameters.find(k);
        const int v = it == c_.parameters.end() ? fallback : static_cast<int>(*cfg::to_int(it->second));
        echo_[k] = v;
        return v;
    }

    std::vector<double> reals(const std::string& k)
    {
        auto v = *cfg::to_reals(c_.parameters.at(k));
        echo_[k] = io::nums(v);
        return v;
    }

    std::string word(const std::string& k, const std::string& fallback)
    {
        auto it = c_.parameters.find(k);
        const std::string v = it == c_.parameters.end() ? fallback : it->second;
        echo_[k] = v;
        return v;
    }

    std::pair<double, double> band(double lo, double hi)
    {
        auto it = c_.parameters.find("band");
        if (it != c_.parameters.end()) {
            auto p = cfg::split(it->second, ':');
            lo = *cfg::to_real(p[0]), hi = *cfg::to_real(p[1]);
        }
        echo_["band"] = json::array({io::num(lo), io::num(hi)});
        return {lo, hi};
    }

    std::vector<std::int64_t> ints(const std::string& k, std::vector<std::int64_t> fallback)
    {
        auto it = c_.parameters.find(k);
        auto v = it == c_.parameters.end() ? fallback : *cfg::to_ints(it->second);
        echo_[k] = v;
        return v;
    }

    double dyadic_scale(const std::string& k, double fallback)
    {
        auto it = c_.parameters.find(k);
        const double v = it == c_.parameters.end() ? fallback : dyadic(*cfg::dyadic_exponent_of(it->second));
        echo_[k] = v;
        return v;
    }

private:
    const ExperimentConfig& c_;
    json& echo_;
};

// ---- inputs ----------------------------------------------------------------

namespace detail {

inline double arg_real(const InputSpec& in, const char* k, double fallback)
{
    auto v = in.arg(k);
    return v ? *cfg::to_real(*v) : fallback;
}

inline int arg_int(const InputSpec& in, const char* k, int fallback)
{
    auto v = in.arg(k);
    return v ? static_cast<int>(*cfg::to_int(*v)) : fallback;
}

inline GridMeasure apply_affine(const GridMeasure& mu, double a, double b)
{
    if (a == 1.0 && b == 0.0) return mu;
    if (a == 1.0) {
        const double f = b * std::ldexp(1.0, mu.level);
        if (f == std::floor(f)) return shifted(mu, b);
    }
    return pushforward_affine(mu, a, b);
}

}  // namespace detail

// Cantor inputs without a seed draw one from the config seed, keyed by the
// input's position. Relative file paths resolve against base_dir.
inline GridMeasure build_input(const InputSpec& in, const ExperimentConfig& c, std::size_t index,
                               const std::filesystem::path& base_dir = {})
{
    const int level = detail::arg_int(in, "level", c.m);
    GridMeasure mu;
    if (in.kind == "uniform") {
        mu = uniform(detail::arg_real(in, "lo", 0), detail::arg_real(in, "hi", 1), level);
    } else if (in.kind == "point") {
        mu = point_mass(detail::arg_real(in, "x", 0), level);
    } else if (in.kind == "cantor") {
        CantorSpec cs;
        cs.D = detail::arg_int(in, "D", 1);
        cs.keep.clear();
        const auto keep = *cfg::to_ints(*in.arg("keep"));
        for (auto k : keep) cs.keep.push_back(static_cast<int>(k));
        cs.depth = detail::arg_int(in, "depth", 1);
        auto s = in.arg("seed");
        cs.seed = s ? static_cast<std::uint64_t>(*cfg::to_int(*s)) : Rng(c.seed).split(index).next();
        mu = make_random_frostman(cs).measure;
    } else if (in.kind == "file") {
        std::filesystem::path path(*in.arg("path"));
        if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
        std::ifstream f(path);
        require(static_cast<bool>(f), cat("input.", in.name, ": cannot open ", path.string()));
        mu = read_measure(f);
    } else if (in.kind == "comb") {
        Comb cb = in.arg("level") ? make_comb(detail::arg_real(in, "r", 0.25), detail::arg_real(in, "c", 0.125), level)
                                  : make_comb(detail::arg_real(in, "r", 0.25), detail::arg_real(in, "c", 0.125));
        mu = cb.measure;
    } else if (in.kind == "interval") {
        mu = make_interval_example(detail::arg_real(in, "s", 0.5), c.delta(), detail::arg_real(in, "c", 0.25));
    } else if (in.kind == "hset") {
        auto sch = in.arg("schedule") ? *cfg::to_ints(*in.arg("schedule")) : default_schedule(level);
        mu = make_H_s(detail::arg_real(in, "s", 0.5), sch, level).measure;
    } else {
        throw contract_error(cat("input.", in.name, ": unknown kind ", in.kind));
    }
    return detail::apply_affine(mu, detail::arg_real(in, "a", 1.0), detail::arg_real(in, "b", 0.0));
}

// ---- report assembly -------------------------------------------------------

inline json verdict_json(const Verdict& v)
{
    json j;
    j["name"] = v.name;
    j["status"] = v.status;
    j["exact"] = v.exact;
    j["measured"] = io::num(v.measured);
    j["limit"] = io::num(v.limit);
    if (!v.note.empty()) j["note"] = v.note;
    return j;
}

inline json config_json(const ExperimentConfig& c)
{
    json j;
    j["experiment"] = c.experiment;
    j["m"] = c.m;
    j["delta"] = c.delta();
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["output_dir"] = c.output_dir;
    j["parameters"] = json::object();
    for (auto& [k, v] : c.parameters) j["parameters"][k] = v;
    j["inputs"] = json::array();
    for (auto& in : c.inputs) {
        json a = json::object();
        for (auto& [k, v] : in.args) a[k] = v;
        j["inputs"].push_back({{"name", in.name}, {"kind", in.kind}, {"args", a}});
    }
    j["text"] = serialize(c);
    return j;
}

inline std::string report_json(const RunReport& r)
{
    json j;
    j["schema_version"] = config_schema_version;
    j["tool"] = "decaylab";
    j["version"] = tool_version;
    j["config"] = config_json(r.config);
    j["effective_parameters"] = r.effective;
    j["overrides"] = r.overrides;
    j["seed"] = r.config.seed;
    j["verdicts"] = json::array();
    for (auto& v : r.verdicts) j["verdicts"].push_back(verdict_json(v));
    j["results"] = r.results;
    json arts = json::array();
    for (auto& f : r.files) arts.push_back(f.name);
    arts.push_back("timings.json");
    j["artifacts"] = arts;
    j["exit_code"] = r.exit_code;
    return j.dump(2) + "\n";
}

inline std::string timings_json(const RunReport& r)
{
    json j = json::object();
    for (auto& [k, v] : r.timings) j[k] = v;
    return j.dump(2) + "\n";
}

// ---- experiments -----------------------------------------------------------

namespace run {

struct Ctx {
    const ExperimentConfig& c;
    const DispatchHooks& hooks;
    RunReport& rep;
    Params p;
    std::vector<GridMeasure> inputs;  // in config order
    std::map<std::string, GridMeasure> named;

    double delta() const { return c.delta(); }
    void add(std::vector<Verdict> vs) { rep.verdicts.insert(rep.verdicts.end(), vs.begin(), vs.end()); }
    void file(std::string name, std::string content) { rep.files.push_back({std::move(name), std::move(content)}); }

    const GridMeasure& get(const std::string& name) const
    {
        auto it = named.find(name);
        require(it != named.end(), cat("missing input ", name));
        return it->second;
    }
};

inline json profile_sidecar(const DecayProfile& p)
{
    json j;
    j["band"] = json::array({io::num(p.xi_min), io::num(p.xi_max)});
    j["tau_hat"] = io::num(p.tau_hat);
    j["fit_residual"] = io::num(p.fit_residual);
    j["floor_hits"] = p.floor_hits;
    return j;
}

// Rows sorted by xi ascending.
inline std::string decay_csv(const std::vector<double>& xi, const std::vector<double>& mag)
{
    std::vector<std::size_t> order(xi.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xi[a] < xi[b]; });
    io::Csv t({"xi", "magnitude"});
    for (auto i : order) t.row(xi[i], mag[i]);
    return t.str();
}

inline double default_fit_lo(double delta) { return std::min(64.0, 1.0 / (4.0 * delta)); }

inline void base_case(Ctx& x)
{
    const double s = x.p.real("s"), t = x.p.real("t");
    auto [lo, hi] = x.p.band(default_fit_lo(x.delta()), 1.0 / x.delta());
    BaseCaseOptions opt;
    opt.fit_lo = lo, opt.fit_hi = hi;
    opt.fit_samples = static_cast<std::size_t>(x.p.integer("n_samples", 48));
    const GridMeasure &mu = x.get("mu"), &nu = x.get("nu");
    auto r = run_base_case(mu, nu, s, t, x.delta(), opt);

    auto check = x.hooks.order_check ? x.hooks.order_check
                                     : [](const GridMeasure& a, const GridMeasure& b, double xi) { return order_check(a, b, xi); };
    double worst = -std::numeric_limits<double>::infinity();
    for (double xi : band_samples(x.delta(), 9)) {
        auto oc = check(mu, nu, xi);
        worst = std::max(worst, oc.lhs - oc.rhs);
    }
    x.add(r.verdicts);
    x.add({exact_verdict("base_case.order_exchange", worst <= 1e-12, worst, 1e-12, "max over 9 band samples of lhs - rhs")});

    auto& j = x.rep.results;
    j["l2_mu"] = io::num(r.l2_mu), j["l2_nu"] = io::num(r.l2_nu);
    j["l2_mu_limit"] = io::num(r.l2_mu_limit), j["l2_nu_limit"] = io::num(r.l2_nu_limit);
    j["precondition_ok"] = r.precondition_ok;
    j["max_magnitude"] = io::num(r.max_magnitude), j["xi_at_max"] = io::num(r.xi_at_max);
    j["bound_exponent"] = io::num(r.bound_exponent), j["bound"] = io::num(r.bound), j["C_meas"] = io::num(r.C_meas);
    j["profile"] = profile_sidecar(r.profile);
    j["l2_bound"] = {{"A", io::num(r.l2_bound.A)}, {"B", io::num(r.l2_bound.B)}, {"bound", io::num(r.l2_bound.bound)},
                     {"actual", io::num(r.l2_bound.actual)}, {"ratio", io::num(r.l2_bound.ratio)}};
    j["order_exchange_worst"] = io::num(worst);
    x.file("decay.csv", decay_csv(r.profile.xi, r.profile.magnitude));
    x.file("decay.json", profile_sidecar(r.profile).dump(2) + "\n");
    x.file("band.csv", decay_csv(r.xi, r.magnitude));
}

inline void decay(Ctx& x)
{
    auto [lo, hi] = x.p.band(default_fit_lo(x.delta()), 1.0 / x.delta());
    const auto n = static_cast<std::size_t>(x.p.integer("n_samples", 48));
    auto xi = log_band(lo, hi, n);
    std::vector<double> mag(n);
    for (std::size_t k = 0; k < n; ++k) mag[k] = std::abs(product_fourier_cells(x.inputs, xi[k]));
    auto prof = fit_decay(xi, mag);
    double band_max = 0.0;
    for (double v : band_samples(x.delta(), 33)) band_max = std::max(band_max, std::abs(product_fourier_cells(x.inputs, v)));
    const double tau_band = band_exponent(band_max, x.delta());
    x.add({evidence("decay.tau_hat", prof.tau_hat, 0.0, "least-squares exponent over the fit band"),
           evidence("decay.band_exponent", tau_band, 0.0, "ln(max |F| over [1/delta, 2/delta]) / ln delta")});
    auto& j = x.rep.results;
    j["factors"] = x.inputs.size();
    j["profile"] = profile_sidecar(prof);
    j["band_max"] = io::num(band_max);
    j["band_exponent"] = io::num(tau_band);
    x.file("decay.csv", decay_csv(prof.xi, prof.magnitude));
    x.file("decay.json", profile_sidecar(prof).dump(2) + "\n");
}

inline void flatten(Ctx& x)
{
    const double s = x.p.real("s"), t = x.p.real("t");
    const int k_max = x.p.integer("k_max", 4);
    const double kappa = x.p.real("kappa", 0.1);
    auto tr = run_flattening(x.get("mu"), x.get("nu"), s, t, x.delta(), k_max, kappa);
    x.add(tr.verdicts);
    auto& j = x.rep.results;
    j["energy_exponent"] = io::num(tr.energy_exponent);
    j["energy_mu"] = io::num(tr.energy_mu), j["energy_nu"] = io::num(tr.energy_nu);
    j["k_values"] = tr.k_values;
    j["energies"] = io::nums(tr.energies);
    j["target_ratio"] = io::nums(tr.target_ratio);
    j["first_k_meeting_target"] = tr.first_k_meeting_target;
    j["monotone_worst"] = io::num(tr.monotone_worst);
    j["truncated"] = tr.truncated;
    if (tr.truncated) j["truncation"] = tr.truncation;
    io::Csv f({"r", "k", "J"}), ls({"k", "r", "j", "count"});
    for (std::size_t k = 0; k < tr.J.size(); ++k)
        for (std::size_t i = 0; i < tr.r_values.size(); ++i) {
            f.row(tr.r_values[i], tr.k_values[k], tr.J[k][i]);
            for (auto& [cls, cnt] : tr.level_sets[k][i]) ls.row(tr.k_values[k], tr.r_values[i], cls, cnt);
        }
    x.file("flatten.csv", f.str());
    x.file("level_sets.csv", ls.str());
}

inline void level_sets(Ctx& x)
{
    const double r = x.p.dyadic_scale("r", std::min(1.0, 16.0 * x.delta()));
    auto rep = run_level_sets(x.get("lambda"), r);
    x.add(rep.verdicts);
    auto& j = x.rep.results;
    j["r"] = r;
    j["C_upper"] = io::num(rep.C_upper), j["C_lower"] = io::num(rep.C_lower);
    j["class_count"] = rep.class_count;
    j["log_scale"] = io::num(rep.log_scale);
    io::Csv t({"j", "count", "mass"});
    for (auto& [cls, cnt] : rep.histogram) t.row(cls, cnt, rep.class_mass.at(cls));
    x.file("level_sets.csv", t.str());
}

inline void induction(Ctx& x)
{
    auto ex = x.p.reals("s");
    const int k = x.p.integer("k", 1);
    const auto n = static_cast<std::size_t>(x.p.integer("n_samples", 64));
    auto rep = run_induction_chain(x.inputs, ex, x.delta(), k, n);
    x.add(rep.verdicts);
    auto& j = x.rep.results;
    j["n"] = rep.n, j["k"] = rep.k;
    j["exponent_sum"] = io::num(rep.exponent_sum);
    j["worst_cauchy_schwarz"] = io::num(rep.worst_cs);
    j["worst_double_exchange"] = io::num(rep.worst_pi);
    j["worst_chain"] = io::num(rep.worst_final);
    j["worst_rescaling"] = io::num(rep.worst_rescale);
    j["grid_discrepancy"] = io::num(rep.grid_discrepancy);
    j["rescaled_support"] = json::array({io::num(rep.rescaled_lo), io::num(rep.rescaled_hi)});
    j["rescaled_energy"] = io::num(rep.rescaled_energy);
    j["tau_full"] = io::num(rep.tau_full), j["tau_pair"] = io::num(rep.tau_pair);
    j["max_full"] = io::num(rep.max_full), j["max_pair"] = io::num(rep.max_pair);
    j["chain_holds"] = rep.chain_holds;
    io::Csv t({"xi", "F", "lhs", "R1", "rhs", "grid_rhs"});
    for (auto& s : rep.samples) t.row(s.xi, s.F, s.lhs, s.R1, s.rhs, s.grid_rhs);
    x.file("chain.csv", t.str());
}

inline void iterated(Ctx& x)
{
    const double sigma = x.p.real("sigma"), C0 = x.p.real("C0", 2.0);
    const auto n = static_cast<std::size_t>(x.p.integer("n_samples", 32));
    auto rep = run_iterated_products(x.inputs, sigma, x.delta(), C0, n);
    x.add(rep.verdicts);
    auto& j = x.rep.results;
    j["n"] = rep.n, j["ell"] = rep.ell;
    j["tau_theory"] = io::num(rep.tau_theory), j["tau_measured"] = io::num(rep.tau_measured);
    j["max_magnitude"] = io::num(rep.max_magnitude);
    j["C_literal"] = io::num(rep.C_literal);
    j["input_energies"] = io::nums(rep.input_energies);
    io::Csv t({"name", "lo", "hi", "cells", "energy", "gain_exponent", "C_meas"});
    for (auto& s : rep.stages) t.row(s.name, s.lo, s.hi, s.cells, s.energy, s.gain_exponent, s.C_meas);
    x.file("stages.csv", t.str());
}

inline void keystep(Ctx& x)
{
    const double s = x.p.real("s"), t = x.p.real("t");
    const double C = x.p.real("C", 4.0), tau = x.p.real("tau", 0.01), eps = x.p.real("eps", 0.05);
    auto rep = run_keystep_scan(x.get("mu"), x.get("nu"), s, t, x.delta(), C, tau, eps);
    x.add(rep.verdicts);
    auto& j = x.rep.results;
    j["never_false"] = rep.never_false;
    j["antecedent_count"] = rep.antecedent_count;
    j["scales"] = rep.rows.size();
    io::Csv f({"rho", "mu_l2", "antecedent_limit", "antecedent", "pi_l2", "consequent_limit", "consequent", "implication", "A_size",
               "B_size", "energy_AB", "energy_normalized"});
    for (auto& r : rep.rows)
        f.row(r.rho, r.mu_l2, r.antecedent_limit, r.antecedent, r.pi_l2, r.consequent_limit, r.consequent, r.implication, r.A_size,
              r.B_size, r.energy_AB, r.energy_normalized);
    x.file("keystep.csv", f.str());
}

inline constexpr int projection_battery = 16;

// One scan for explicit a1, a2; otherwise a battery of seeded 2-of-4 Cantor
// pairs at level m.
inline void project(Ctx& x)
{
    const double s = x.p.real("s"), t = x.p.real("t"), c = x.p.real("c", 1.0 / 24);
    std::vector<std::pair<GridSet1, GridSet1>> pairs;
    if (x.named.count("a1")) {
        pairs.push_back({support_set(x.get("a1")), support_set(x.get("a2"))});
    } else {
        Rng base(x.c.seed);
        for (int i = 0; i < projection_battery; ++i) {
            auto mk = [&](std::uint64_t tag) {
                CantorSpec cs{2, {2}, x.c.m / 2, base.split(tag).next()};
                return make_random_frostman(cs).set;
            };
            pairs.push_back({mk(2 * static_cast<std::uint64_t>(i)), mk(2 * static_cast<std::uint64_t>(i) + 1)});
        }
    }
    GridSet1 Y;
    if (x.named.count("y")) {
        Y = support_set(x.get("y"));
    } else {
        std::vector<std::int64_t> idx(static_cast<std::size_t>(1) << x.c.m);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int64_t>(i);
        Y = make_set1(x.c.m, idx);
    }
    json blocks = json::array();
    double worst = std::numeric_limits<double>::infinity();
    bool all = true;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto sc = projection_scan(pairs[i].first, pairs[i].second, Y, s, t, c);
        io::Csv f({"y", "covering"});
        for (std::size_t k = 0; k < sc.y.size(); ++k) f.row(sc.y[k], sc.covering[k]);
        x.file(pairs.size() == 1 ? "projection.csv" : cat("projection_", i < 10 ? "0" : "", i, ".csv"), f.str());
        blocks.push_back({{"instance", i},
                          {"min", sc.min},
                          {"max", sc.max},
                          {"argmax_y", sc.argmax_y},
                          {"threshold", io::num(sc.threshold)},
                          {"fraction_meeting", sc.fraction_meeting},
                          {"pass", sc.pass}});
        worst = std::min(worst, static_cast<double>(sc.max) / sc.threshold);
        all = all && sc.pass;
    }
    x.add({bound_verdict("project.instances", all, worst, 1.0, cat("min over ", pairs.size(), " instances of max covering / delta^{-s-ct}"))});
    x.rep.results["instances"] = blocks;
    x.rep.results["directions"] = Y.size();
    x.file("projection_verdict.json", json{{"instances", blocks}, {"pass", all}, {"worst_ratio", io::num(worst)}}.dump(2) + "\n");
}

// sum_{p,q} m_p m_q mu^(xi x_p x_q) over atoms.
inline cplx triple_atomic(const GridMeasure& mu, double xi)
{
    const auto a = atoms(mu);
    std::vector<cplx> part(a.size());
    for_chunks(a.size(), [&](std::size_t i) {
        cplx s{0.0, 0.0};
        for (auto& q : a) s += q.mass * fourier_at(a, xi * a[i].x * q.x);
        part[i] = a[i].mass * s;
    });
    cplx s{0.0, 0.0};
    for (auto& v : part) s += v;
    return s;
}

inline void counterexample(Ctx& x)
{
    const double s = x.p.real("s");
    const std::string which = x.p.word("example", "L2");
    const double d = x.delta();
    auto& j = x.rep.results;
    j["example"] = which;
    if (which == "L2") {
        const double c = x.p.real("c", 1.0 / 16);
        auto L = make_L2_counterexample(s, d, c);
        const double l2 = l2sq_density(regularize(L.measure, d));
        const double target = std::pow(d, -(1.0 - s));
        const GridMeasure mm = convolve(L.measure, L.measure, ConvOp::mul, L.measure.level);
        const cplx tr = product_fourier(mm, L.measure, 1.0 / d);
        const cplx rho = fourier_at(L.comb.measure, 1.0 / L.r);
        const double audit = std::abs(tr - rho * rho * rho);
        j["r"] = L.r;
        j["comb_level"] = L.comb.measure.level;
        j["comb_cells"] = L.comb.set.size();
        j["min_cos"] = io::num(L.comb.min_cos);
        j["comb_transform"] = io::num(L.comb.transform_at);
        j["measure_level"] = L.measure.level;
        j["support"] = json::array({io::num(L.measure.lo()), io::num(L.measure.hi())});
        j["l2"] = io::num(l2), j["l2_target"] = io::num(target), j["l2_ratio"] = io::num(l2 / target);
        j["triple"] = io::num(std::abs(tr));
        j["phase_audit"] = io::num(audit), j["phase_budget"] = io::num(L.phase_budget);
        const double ratio = l2 / target;
        x.add({bound_verdict("counterexample.l2_size", ratio <= 16 && ratio >= 1.0 / 16, ratio, 16,
                             "||mu_delta||^2 / delta^{s-1}, must lie in [1/16, 16]"),
               bound_verdict("counterexample.no_decay", std::abs(tr) >= 0.125, std::abs(tr), 0.125, "|(mu x mu x mu)^(1/delta)|"),
               bound_verdict("counterexample.phase_audit", audit <= L.phase_budget, audit, L.phase_budget,
                             "|triple - rho^(1/r)^3| against the phase budget")});
    } else {
        const double c = x.p.real("c", 0.25);
        const GridMeasure I = make_interval_example(s, d, c);
        const double tr = std::abs(triple_atomic(I, 1.0 / d));
        const double top = std::pow(I.hi(), 3);
        const double l2 = l2sq_density(regularize(I, std::min(d, I.scale() * 8)));
        j["level"] = I.level, j["cells"] = I.size();
        j["length"] = io::num(I.hi());
        j["triple"] = io::num(tr);
        j["support_top"] = io::num(top), j["support_limit"] = io::num(c * d);
        j["l2"] = io::num(l2);
        x.add({bound_verdict("counterexample.no_decay", tr >= 0.5, tr, 0.5, "|(mu x mu x mu)^(1/delta)|"),
               exact_verdict("counterexample.support", top <= c * d, top, c * d, "triple product support lies in [0, c delta]")});
    }
}

inline void hset(Ctx& x)
{
    const double s = x.p.real("s");
    auto sch = x.p.ints("schedule", default_schedule(x.c.m));
    const int copies = x.p.integer("copies", 3);
    auto H = make_H_s(s, sch, x.c.m);
    auto& j = x.rep.results;
    j["cells"] = H.set.size();
    json cov = json::object();
    for (auto n : sch)
        if (auto e = exact_log2(1.0 / static_cast<double>(n)); e && -*e <= x.c.m)
            cov[std::to_string(n)] = covering_number(H.set, 1.0 / static_cast<double>(n));
    j["covering_at_inverse_n"] = cov;
    std::vector<GridSet1> sets(static_cast<std::size_t>(copies), H.set);
    auto pc = product_containment(sets, std::vector<double>(sets.size(), s), sch);
    io::Csv t({"k", "n", "worst", "bound"});
    for (std::size_t k = 0; k < sch.size(); ++k) t.row(k + 1, sch[k], pc.worst[k], pc.bound[k]);
    double worst = 0.0;
    for (std::size_t k = 0; k < sch.size(); ++k) worst = std::max(worst, pc.worst[k] / pc.bound[k]);
    x.add({exact_verdict("hset.product_containment", pc.pass, worst, 1.0, "max over k of distance / allowed distance")});
    x.file("containment.csv", t.str());
    std::ostringstream os;
    write_set(os, H.set);
    x.file("hset.txt", os.str());
}

}  // namespace run

inline std::vector<InputSpec> default_inputs(const ExperimentConfig& c)
{
    auto U = [](std::string name, const char* lo, const char* hi) { return InputSpec{std::move(name), "uniform", {{"lo", lo}, {"hi", hi}}}; };
    std::vector<InputSpec> out;
    const std::string& e = c.experiment;
    if (e == "base-case" || e == "keystep") out = {U("mu", "1", "2"), U("nu", "1", "2")};
    else if (e == "flatten") out = {U("mu", "-1", "1"), U("nu", "-1", "1")};
    else if (e == "level-sets") out = {U("lambda", "0", "1")};
    else if (e == "decay") out = {U("mu", "1", "2")};
    else if (e == "induction") out = {U("mu1", "1", "2"), U("mu2", "1", "2"), U("mu3", "1", "2")};
    else if (e == "iterated") {
        const double sigma = *cfg::to_real(c.parameters.at("sigma"));
        const double C0 = c.parameters.count("C0") ? *cfg::to_real(c.parameters.at("C0")) : 2.0;
        for (int i = 0; i < iterated_inputs_needed(sigma, C0); ++i) out.push_back(U(cat("mu", i + 1), "1", "2"));
    }
    // Named inputs given in the config replace the defaults of the same name.
    if (!out.empty() && !cfg::experiment_rules().at(e).any_inputs) {
        for (auto& in : c.inputs)
            for (auto& d : out)
                if (d.name == in.name) d = in;
        for (auto& in : c.inputs)
            if (std::none_of(out.begin(), out.end(), [&](auto& d) { return d.name == in.name; })) out.push_back(in);
        return out;
    }
    return c.inputs.empty() ? out : c.inputs;
}

// Runs the experiment. Contract errors propagate to the caller.
inline RunReport dispatch(const ExperimentConfig& c, const DispatchHooks& hooks = {}, std::vector<std::string> overrides = {},
                          const std::filesystem::path& base_dir = {})
{
    using clock = std::chrono::steady_clock;
    set_max_threads(c.threads);
    RunReport rep;
    rep.config = c;
    rep.overrides = std::move(overrides);
    rep.effective = json::object();
    run::Ctx x{c, hooks, rep, Params(c, rep.effective), {}, {}};

    auto t0 = clock::now();
    const auto specs = default_inputs(c);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        x.inputs.push_back(build_input(specs[i], c, i, base_dir));
        x.named[specs[i].name] = x.inputs.back();
    }
    json in = json::array();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& m = x.inputs[i];
        in.push_back({{"name", specs[i].name}, {"kind", specs[i].kind}, {"level", m.level}, {"cells", m.size()},
                      {"support", json::array({io::num(m.lo()), io::num(m.hi())})}, {"mass", io::num(m.total_mass)}});
    }
    rep.results["inputs"] = in;
    auto t1 = clock::now();
    rep.timings.push_back({"inputs", std::chrono::duration<double>(t1 - t0).count()});

    const std::string& e = c.experiment;
    if (e == "base-case") run::base_case(x);
    else if (e == "decay") run::decay(x);
    else if (e == "flatten") run::flatten(x);
    else if (e == "level-sets") run::level_sets(x);
    else if (e == "induction") run::induction(x);
    else if (e == "iterated") run::iterated(x);
    else if (e == "keystep") run::keystep(x);
    else if (e == "project") run::project(x);
    else if (e == "counterexample") run::counterexample(x);
    else if (e == "hset") run::hset(x);
    else throw contract_error(cat("unknown experiment ", e));
    rep.timings.push_back({"run", std::chrono::duration<double>(clock::now() - t1).count()});

    require(!rep.verdicts.empty(), cat("experiment ", e, " produced no verdicts"));
    rep.exit_code = exit_code_for(rep.verdicts);
    return rep;
}

// Side tables first, the report last; each file goes through temp + rename.
inline std::vector<std::filesystem::path> emit(const RunReport& r, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw std::runtime_error(cat("cannot create output directory ", dir.string()));
    std::vector<std::filesystem::path> out;
    for (auto& f : r.files) {
        io::write_atomic(dir / f.name, f.content);
        out.push_back(dir / f.name);
    }
    io::write_atomic(dir / "timings.json", timings_json(r));
    out.push_back(dir / "timings.json");
    io::write_atomic(dir / "report.json", report_json(r));
    out.push_back(dir / "report.json");
    return out;
}

// Explicit flag, then the config, then DECAYLAB_OUTPUT_DIR, then ./decaylab-out.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& c, const std::string& flag)
{
    if (!flag.empty()) return flag;
    if (!c.output_dir.empty()) return c.output_dir;
    if (const char* env = std::getenv("DECAYLAB_OUTPUT_DIR"); env && *env) return env;
    return "decaylab-out";
}

// Parse, run and write. Returns the process exit code: 0 all exact verdicts
// hold, 1 an exact verdict failed, 2 configuration or runtime error.
inline int run_text(const std::string& text, const std::vector<std::string>& overrides, const std::string& output_flag,
                    std::ostream& log, const DispatchHooks& hooks = {}, const std::filesystem::path& base_dir = {})
{
    auto parsed = parse_config(text, overrides);
    if (!parsed.ok()) {
        for (auto& e : parsed.errors) log << "config error: " << e << '\n';
        return 2;
    }
    try {
        auto rep = dispatch(*parsed.config, hooks, overrides, base_dir);
        const auto dir = resolve_output_dir(*parsed.config, output_flag);
        emit(rep, dir);
        for (auto& v : rep.verdicts) log << v.status << ' ' << v.name << " measured=" << io::fmt(v.measured) << '\n';
        log << "report: " << (dir / "report.json").string() << '\n';
        return rep.exit_code;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace decaylab
