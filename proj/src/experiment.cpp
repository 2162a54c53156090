#include "ehpc/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>

#include "ehpc/errors.hpp"
#include "ehpc/policy_io.hpp"

namespace ehpc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void read_opt(const json& j, const char* key, std::optional<double>& out, const std::string& where) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
        return;
    }
    double v = 0.0;
    read(j, key, v, where);
    out = v;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json block_to_json(const SensorBlock& b) {
    return {
        {"sensing",
         {{"snr_s_db", opt_json(b.sensing.snr_s_db)},
          {"amplitude", opt_json(b.sensing.amplitude)},
          {"noise_var", b.sensing.noise_var},
          {"mode", b.sensing.mode},
          {"pd_bar", b.sensing.pd_bar},
          {"threshold", b.sensing.threshold},
          {"prior0", b.sensing.prior0},
          {"prior1", b.sensing.prior1}}},
        {"deployment",
         {{"kind", b.deployment.kind},
          {"p0_dbw", b.deployment.p0_dbw},
          {"r0_m", b.deployment.r0_m},
          {"r1_m", b.deployment.r1_m},
          {"path_loss_exp", b.deployment.path_loss_exp},
          {"intensity_form", b.deployment.intensity_form}}},
        {"channel",
         {{"mean_square_gain", b.channel.mean_square_gain},
          {"doppler_product", b.channel.doppler_product},
          {"noise_var", b.channel.noise_var},
          {"quantizer",
           {{"method", b.channel.quantizer.method},
            {"levels", b.channel.quantizer.levels},
            {"boundaries", b.channel.quantizer.boundaries}}}}},
        {"energy",
         {{"rho", b.energy.rho},
          {"harvest_levels_cells", b.energy.harvest_levels_cells},
          {"capacity_cells", b.energy.capacity_cells},
          {"cell_energy_mj", b.energy.cell_energy_mj},
          {"slot_s", b.energy.slot_s}}},
        {"reward",
         {{"averaging", b.reward.averaging}, {"jhat", b.reward.jhat}, {"omega_rate", b.reward.omega_rate}}},
    };
}

// Reads the per-sensor blocks present in `j` on top of `b`.
void read_blocks(const json& j, SensorBlock& b, const std::string& where) {
    if (j.contains("sensing")) {
        const json& s = j.at("sensing");
        const std::string w = where + "sensing";
        check_keys(s, {"snr_s_db", "amplitude", "noise_var", "mode", "pd_bar", "threshold", "prior0", "prior1"}, w);
        read_opt(s, "snr_s_db", b.sensing.snr_s_db, w);
        read_opt(s, "amplitude", b.sensing.amplitude, w);
        read(s, "noise_var", b.sensing.noise_var, w);
        read(s, "mode", b.sensing.mode, w);
        read(s, "pd_bar", b.sensing.pd_bar, w);
        read(s, "threshold", b.sensing.threshold, w);
        read(s, "prior0", b.sensing.prior0, w);
        read(s, "prior1", b.sensing.prior1, w);
    }
    if (j.contains("deployment")) {
        const json& s = j.at("deployment");
        const std::string w = where + "deployment";
        check_keys(s, {"kind", "p0_dbw", "r0_m", "r1_m", "path_loss_exp", "intensity_form"}, w);
        read(s, "kind", b.deployment.kind, w);
        read(s, "p0_dbw", b.deployment.p0_dbw, w);
        read(s, "r0_m", b.deployment.r0_m, w);
        read(s, "r1_m", b.deployment.r1_m, w);
        read(s, "path_loss_exp", b.deployment.path_loss_exp, w);
        read(s, "intensity_form", b.deployment.intensity_form, w);
    }
    if (j.contains("channel")) {
        const json& s = j.at("channel");
        const std::string w = where + "channel";
        check_keys(s, {"mean_square_gain", "doppler_product", "noise_var", "quantizer"}, w);
        read(s, "mean_square_gain", b.channel.mean_square_gain, w);
        read(s, "doppler_product", b.channel.doppler_product, w);
        read(s, "noise_var", b.channel.noise_var, w);
        if (s.contains("quantizer")) {
            const json& q = s.at("quantizer");
            check_keys(q, {"method", "levels", "boundaries"}, w + ".quantizer");
            read(q, "method", b.channel.quantizer.method, w + ".quantizer");
            read(q, "levels", b.channel.quantizer.levels, w + ".quantizer");
            read(q, "boundaries", b.channel.quantizer.boundaries, w + ".quantizer");
        }
    }
    if (j.contains("energy")) {
        const json& s = j.at("energy");
        const std::string w = where + "energy";
        check_keys(s, {"rho", "harvest_levels_cells", "capacity_cells", "cell_energy_mj", "slot_s"}, w);
        read(s, "rho", b.energy.rho, w);
        read(s, "harvest_levels_cells", b.energy.harvest_levels_cells, w);
        read(s, "capacity_cells", b.energy.capacity_cells, w);
        read(s, "cell_energy_mj", b.energy.cell_energy_mj, w);
        read(s, "slot_s", b.energy.slot_s, w);
    }
    if (j.contains("reward")) {
        const json& s = j.at("reward");
        const std::string w = where + "reward";
        check_keys(s, {"averaging", "jhat", "omega_rate"}, w);
        read(s, "averaging", b.reward.averaging, w);
        read(s, "jhat", b.reward.jhat, w);
        read(s, "omega_rate", b.reward.omega_rate, w);
    }
}

template <class F>
auto as_config_error(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const ParameterError& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const ModelValidityError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

// Writes through a temporary file and renames, so readers never see a partial file.
void write_file(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw ConfigError("cannot write '" + tmp.string() + "'");
        os << text;
    }
    fs::rename(tmp, path);
}

std::string policy_file_name(PolicyScope scope, std::size_t sensor) {
    return scope == PolicyScope::Global ? "policy.csv" : "policy_sensor_" + std::to_string(sensor) + ".csv";
}

McOptions mc_options(const ExperimentConfig& c) {
    McOptions o;
    o.runs = c.mc.runs;
    o.seed = c.mc.seed;
    o.warmup_slots = c.mc.warmup_slots;
    o.workers = c.mc.workers;
    o.fusion = fusion_knowledge_from_string(c.mc.fusion);
    o.pilot_runs = c.mc.pilot_runs;
    return o;
}

// Expected spend in mW of sensor k per (battery, level, harvest), averaged
// over the other sensors' states uniformly for global tables.
std::vector<double> marginal_spend(const NetworkModel& net, const NetworkPolicy& p, std::size_t k) {
    const SensorModel& m = net.sensors[k];
    std::vector<double> sum(m.state_count(), 0.0), count(m.state_count(), 0.0);
    if (p.kind == NetworkPolicy::Kind::Decentralized) {
        for (std::size_t s = 0; s < m.state_count(); ++s) sum[s] = m.power_mw(p.local[k].spend(s, 0));
        return sum;
    }
    const GlobalIndexer idx(p.global.state_counts);
    std::vector<std::size_t> local;
    for (std::size_t g = 0; g < idx.size(); ++g) {
        idx.decode(g, local);
        sum[local[k]] += m.power_mw(p.global.spend(g, k));
        count[local[k]] += 1.0;
    }
    for (std::size_t s = 0; s < sum.size(); ++s) sum[s] /= count[s];
    return sum;
}

void write_policy_plotdata(const NetworkModel& net, const NetworkPolicy& p, const std::string& mode,
                           std::ostream& os) {
    for (std::size_t k = 0; k < net.size(); ++k) {
        const SensorModel& m = net.sensors[k];
        const auto spend = marginal_spend(net, p, k);
        for (std::size_t s = 0; s < m.state_count(); ++s) {
            const LocalState ls = m.decode(s);
            os << mode << "_sensor" << k << ',' << ls.battery << ",alpha2_mw_level" << ls.level << "_harvest"
               << ls.harvest << ',' << spend[s] << ",0\n";
        }
    }
}

std::vector<std::string> figure_names(const ExperimentConfig& c, const std::string& axis) {
    if (axis == "cell_energy_mj") return {"fig5"};
    if (axis == "snr_s_db") return {"fig6", "fig10"};
    if (axis == "p_tot_mw") return {"fig7"};
    if (axis == "capacity_cells") return {"fig8"};
    if (axis == "sensors") return {c.base.deployment.kind == "random_disk" ? "fig12" : "fig9"};
    if (axis == "eta") return {"fig14"};
    if (axis == "p0_dbw") return {"fig11"};
    return {"sweep_" + axis + "_plot"};
}

void erase_path(json& patch, std::initializer_list<const char*> path) {
    json* node = &patch;
    std::vector<const char*> keys(path);
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        if (!node->is_object() || !node->contains(keys[i])) return;
        node = &(*node)[keys[i]];
    }
    if (node->is_object()) node->erase(keys.back());
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    check_keys(j,
               {"network", "sensing", "deployment", "channel", "energy", "reward", "solver", "mc", "sweep",
                "sensor_overrides"},
               "config");
    if (j.contains("network")) {
        const json& n = j.at("network");
        check_keys(n, {"sensors", "p_tot_mw", "eta"}, "network");
        read(n, "sensors", c.sensors, "network");
        read(n, "p_tot_mw", c.p_tot_mw, "network");
        read(n, "eta", c.eta, "network");
    }
    read_blocks(j, c.base, "");
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        check_keys(s,
                   {"eps1", "eps2", "beta0", "max_sweeps", "max_dual_iterations", "memory_budget_bytes",
                    "oscillation_window", "global_mixing", "step_scale", "step_rule"},
                   "solver");
        read(s, "eps1", c.solver.eps1, "solver");
        read(s, "eps2", c.solver.eps2, "solver");
        read(s, "beta0", c.solver.beta0, "solver");
        read(s, "max_sweeps", c.solver.max_sweeps, "solver");
        read(s, "max_dual_iterations", c.solver.max_dual_iterations, "solver");
        read(s, "memory_budget_bytes", c.solver.memory_budget_bytes, "solver");
        read(s, "oscillation_window", c.solver.oscillation_window, "solver");
        std::string mixing = to_string(c.solver.mixing);
        read(s, "global_mixing", mixing, "solver");
        c.solver.mixing = as_config_error("solver.global_mixing", [&] { return global_mixing_from_string(mixing); });
        std::string scale = to_string(c.solver.step_scale);
        read(s, "step_scale", scale, "solver");
        c.solver.step_scale = as_config_error("solver.step_scale", [&] { return step_scale_from_string(scale); });
        std::string rule = to_string(c.solver.step_rule);
        read(s, "step_rule", rule, "solver");
        c.solver.step_rule = as_config_error("solver.step_rule", [&] { return step_rule_from_string(rule); });
    }
    if (j.contains("mc")) {
        const json& s = j.at("mc");
        check_keys(s, {"runs", "seed", "warmup_slots", "fusion", "workers", "pilot_runs"}, "mc");
        read(s, "runs", c.mc.runs, "mc");
        read(s, "seed", c.mc.seed, "mc");
        read(s, "warmup_slots", c.mc.warmup_slots, "mc");
        read(s, "fusion", c.mc.fusion, "mc");
        read(s, "workers", c.mc.workers, "mc");
        read(s, "pilot_runs", c.mc.pilot_runs, "mc");
    }
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        check_keys(s, {"axis", "values", "modes"}, "sweep");
        read(s, "axis", c.sweep.axis, "sweep");
        read(s, "values", c.sweep.values, "sweep");
        read(s, "modes", c.sweep.modes, "sweep");
    }
    if (j.contains("sensor_overrides")) {
        const json& o = j.at("sensor_overrides");
        if (!o.is_array()) throw ConfigError("sensor_overrides: expected an array");
        for (const auto& patch : o) c.sensor_overrides.push_back(patch);
    }

    if (c.sensors < 1) throw ConfigError("network.sensors must be at least 1");
    if (!(c.p_tot_mw > 0.0)) throw ConfigError("network.p_tot_mw must be positive");
    if (!(c.eta > 0.0 && c.eta < 1.0)) throw ConfigError("network.eta must lie in (0, 1)");
    if (!(c.solver.eps1 > 0.0 && c.solver.eps2 > 0.0)) throw ConfigError("solver.eps1 and eps2 must be positive");
    if (!(c.solver.beta0 > 0.0)) throw ConfigError("solver.beta0 must be positive");
    if (c.mc.runs < 1) throw ConfigError("mc.runs must be at least 1");
    as_config_error("mc.fusion", [&] { return fusion_knowledge_from_string(c.mc.fusion); });
    if (!c.sweep.axis.empty()) {
        const auto& axes = sweep_axes();
        if (std::find(axes.begin(), axes.end(), c.sweep.axis) == axes.end())
            throw ConfigError("sweep.axis: unknown axis '" + c.sweep.axis + "'");
        for (const auto& m : c.sweep.modes) as_config_error("sweep.modes", [&] { return solve_mode_from_string(m); });
    }
    if (c.sensor_overrides.size() > c.sensors)
        throw ConfigError("sensor_overrides lists more entries than network.sensors");
    for (std::size_t n = 0; n < c.sensors; ++n) {
        const std::string where = "sensor " + std::to_string(n);
        as_config_error(where, [&] {
            const SensorConfig sc = to_sensor_config(sensor_block(c, n));
            sc.battery.validate();
            sc.channel.validate();
            sc.quantizer.validate();
            sc.sensing.validate();
            sc.deployment.validate();
            build_harvest_chain(sc.harvest_persistence, sc.harvest_levels.size(), sc.harvest_levels);
            build_channel_fsmc(sc.quantizer, sc.channel);
            return 0;
        });
    }
    const SensingBlock& s0 = sensor_block(c, 0).sensing;
    for (std::size_t n = 1; n < c.sensors; ++n) {
        const SensingBlock& s = sensor_block(c, n).sensing;
        if (s.prior0 != s0.prior0 || s.prior1 != s0.prior1)
            throw ConfigError("sensing priors must be identical for all sensors");
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json j = block_to_json(c.base);
    j["network"] = {{"sensors", c.sensors}, {"p_tot_mw", c.p_tot_mw}, {"eta", c.eta}};
    j["solver"] = {{"eps1", c.solver.eps1},
                   {"eps2", c.solver.eps2},
                   {"beta0", c.solver.beta0},
                   {"max_sweeps", c.solver.max_sweeps},
                   {"max_dual_iterations", c.solver.max_dual_iterations},
                   {"memory_budget_bytes", c.solver.memory_budget_bytes},
                   {"oscillation_window", c.solver.oscillation_window},
                   {"global_mixing", to_string(c.solver.mixing)},
                   {"step_scale", to_string(c.solver.step_scale)},
                   {"step_rule", to_string(c.solver.step_rule)}};
    j["mc"] = {{"runs", c.mc.runs},         {"seed", c.mc.seed},       {"warmup_slots", c.mc.warmup_slots},
               {"fusion", c.mc.fusion},     {"workers", c.mc.workers}, {"pilot_runs", c.mc.pilot_runs}};
    j["sweep"] = {{"axis", c.sweep.axis}, {"values", c.sweep.values}, {"modes", c.sweep.modes}};
    j["sensor_overrides"] = json::array();
    for (const auto& o : c.sensor_overrides) j["sensor_overrides"].push_back(o);
    return j;
}

SensorBlock sensor_block(const ExperimentConfig& c, std::size_t n) {
    if (n >= c.sensor_overrides.size() || c.sensor_overrides[n].is_null() || c.sensor_overrides[n].empty())
        return c.base;
    json merged = block_to_json(c.base);
    merged.merge_patch(c.sensor_overrides[n]);
    SensorBlock b;
    const std::string where = "sensor_overrides[" + std::to_string(n) + "].";
    check_keys(merged, {"sensing", "deployment", "channel", "energy", "reward"}, where);
    read_blocks(merged, b, where);
    return b;
}

SensorConfig to_sensor_config(const SensorBlock& b) {
    SensorConfig sc;
    sc.battery.capacity = b.energy.capacity_cells;
    sc.battery.cell_energy_mj = b.energy.cell_energy_mj;
    sc.battery.slot_s = b.energy.slot_s;
    sc.harvest_levels = b.energy.harvest_levels_cells;
    sc.harvest_persistence = b.energy.rho;

    sc.channel.mean_square_gain = b.channel.mean_square_gain;
    sc.channel.doppler_product = b.channel.doppler_product;
    sc.channel.noise_variance = b.channel.noise_var;
    sc.channel.validate();
    const auto& q = b.channel.quantizer;
    const QuantizerMethod method = quantizer_method_from_string(q.method);
    if (method == QuantizerMethod::Explicit) {
        if (q.boundaries.size() != q.levels)
            throw ParameterError("quantizer.levels (" + std::to_string(q.levels) + ") differs from the " +
                                 std::to_string(q.boundaries.size()) + " explicit boundaries");
        sc.quantizer = QuantizerSpec::from_thresholds(q.boundaries);
    } else if (method == QuantizerMethod::Moe) {
        sc.quantizer = design_moe_thresholds(q.levels, b.channel.mean_square_gain);
    } else {
        sc.quantizer = design_mmae_thresholds(q.levels, b.channel.mean_square_gain);
    }

    sc.sensing.obs_noise_var = b.sensing.noise_var;
    if (b.sensing.amplitude) {
        sc.sensing.signal_amplitude = *b.sensing.amplitude;
    } else if (b.sensing.snr_s_db) {
        sc.sensing.signal_amplitude = std::sqrt(b.sensing.noise_var) * std::pow(10.0, *b.sensing.snr_s_db / 20.0);
    } else {
        throw ParameterError("sensing needs snr_s_db or amplitude");
    }
    if (b.sensing.mode == "fixed_pd") sc.sensing.mode = CensorMode::FixedPd;
    else if (b.sensing.mode == "fixed_threshold") sc.sensing.mode = CensorMode::FixedThreshold;
    else throw ParameterError("unknown sensing mode '" + b.sensing.mode + "' (expected fixed_pd|fixed_threshold)");
    sc.sensing.pd_bar = b.sensing.pd_bar;
    sc.sensing.threshold = b.sensing.threshold;
    sc.sensing.prior0 = b.sensing.prior0;
    sc.sensing.prior1 = b.sensing.prior1;

    if (b.deployment.kind == "fixed") sc.deployment.kind = DeploymentKind::Fixed;
    else if (b.deployment.kind == "random_disk") sc.deployment.kind = DeploymentKind::RandomDisk;
    else throw ParameterError("unknown deployment kind '" + b.deployment.kind + "' (expected fixed|random_disk)");
    sc.deployment.source_power = dbw_to_watts(b.deployment.p0_dbw);
    sc.deployment.inner_radius = b.deployment.r0_m;
    sc.deployment.outer_radius = b.deployment.r1_m;
    sc.deployment.path_loss_exponent = b.deployment.path_loss_exp;
    if (b.deployment.intensity_form == "as_written") sc.deployment.form = IntensityForm::AsWritten;
    else if (b.deployment.intensity_form == "power_amplitude") sc.deployment.form = IntensityForm::PowerAmplitude;
    else throw ParameterError("unknown intensity form '" + b.deployment.intensity_form + "'");

    sc.reward.averaging = reward_averaging_from_string(b.reward.averaging);
    sc.reward.jhat_form = jhat_form_from_string(b.reward.jhat);
    sc.reward.omega_rate = omega_rate_from_string(b.reward.omega_rate);
    return sc;
}

NetworkModel build_network(const ExperimentConfig& c) {
    NetworkModel net;
    net.p_tot_mw = c.p_tot_mw;
    net.eta = c.eta;
    for (std::size_t n = 0; n < c.sensors; ++n) {
        const std::string where = "sensor " + std::to_string(n);
        net.sensors.push_back(as_config_error(where, [&] { return build_sensor_model(to_sensor_config(sensor_block(c, n))); }));
    }
    return net;
}

std::string model_hash(const ExperimentConfig& c) {
    json m;
    m["sensors"] = c.sensors;
    m["p_tot_mw"] = c.p_tot_mw;
    m["eta"] = c.eta;
    m["blocks"] = json::array();
    for (std::size_t n = 0; n < c.sensors; ++n) m["blocks"].push_back(block_to_json(sensor_block(c, n)));
    return fnv1a_hex(m.dump());
}

const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes{"p_tot_mw", "capacity_cells", "sensors", "snr_s_db", "levels",
                                               "eta",      "rho",            "cell_energy_mj", "p0_dbw"};
    return axes;
}

ExperimentConfig with_axis_value(const ExperimentConfig& c, const std::string& axis, double value) {
    ExperimentConfig out = c;
    auto as_count = [&](const char* what) {
        if (value < 0.0 || std::floor(value) != value)
            throw ConfigError(std::string(what) + " sweep values must be nonnegative integers");
        return static_cast<std::size_t>(value);
    };
    auto strip = [&](std::initializer_list<const char*> path) {
        for (auto& o : out.sensor_overrides) erase_path(o, path);
    };
    if (axis == "p_tot_mw") {
        out.p_tot_mw = value;
    } else if (axis == "capacity_cells") {
        out.base.energy.capacity_cells = static_cast<int>(as_count("capacity_cells"));
        strip({"energy", "capacity_cells"});
    } else if (axis == "sensors") {
        out.sensors = as_count("sensors");
        if (out.sensor_overrides.size() > out.sensors) out.sensor_overrides.resize(out.sensors);
    } else if (axis == "snr_s_db") {
        out.base.sensing.snr_s_db = value;
        out.base.sensing.amplitude.reset();
        strip({"sensing", "snr_s_db"});
        strip({"sensing", "amplitude"});
    } else if (axis == "levels") {
        out.base.channel.quantizer.levels = as_count("levels");
        strip({"channel", "quantizer", "levels"});
    } else if (axis == "eta") {
        out.eta = value;
    } else if (axis == "rho") {
        out.base.energy.rho = value;
        strip({"energy", "rho"});
    } else if (axis == "cell_energy_mj") {
        out.base.energy.cell_energy_mj = value;
        strip({"energy", "cell_energy_mj"});
    } else if (axis == "p0_dbw") {
        out.base.deployment.p0_dbw = value;
        strip({"deployment", "p0_dbw"});
    } else {
        throw ConfigError("unknown sweep axis '" + axis + "'");
    }
    return parse_config(to_json(out));
}

SolveMode solve_mode_from_string(const std::string& s) {
    if (s == "optimal") return SolveMode::Optimal;
    if (s == "suboptimal") return SolveMode::Suboptimal;
    if (s == "random") return SolveMode::Random;
    throw ConfigError("unknown mode '" + s + "' (expected optimal|suboptimal|random)");
}

std::string to_string(SolveMode m) {
    switch (m) {
        case SolveMode::Optimal: return "optimal";
        case SolveMode::Suboptimal: return "suboptimal";
        case SolveMode::Random: return "random";
    }
    return "unknown";
}

SolvedPolicy solve_policy(const NetworkModel& net, const ExperimentConfig& c, SolveMode mode) {
    SolvedPolicy out;
    if (mode == SolveMode::Optimal) {
        out.report = solve_optimal(net, c.solver);
        out.policy = out.report->policy;
    } else if (mode == SolveMode::Suboptimal) {
        out.report = solve_suboptimal(net, c.solver);
        out.policy = out.report->policy;
    } else {
        auto rng = run_stream(c.mc.seed, 0xFFFFFFFFULL);
        try {
            out.policy = random_policy(net, rng, c.solver.memory_budget_bytes);
        } catch (const GuardError&) {
            out.per_slot_random = true;
        }
    }
    return out;
}

McEstimate simulate_policy(const NetworkModel& net, const ExperimentConfig& c, const SolvedPolicy& p) {
    const SpendRule rule = p.per_slot_random ? random_rule(net) : policy_rule(p.policy);
    return run_episodes(net, rule, mc_options(c));
}

void cmd_design_quantizer(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    std::ostringstream csv;
    csv.precision(15);
    csv << "sensor,method,level,lower,upper,phi,mae\n";
    for (std::size_t n = 0; n < c.sensors; ++n) {
        const SensorConfig sc = as_config_error("sensor " + std::to_string(n), [&] {
            return to_sensor_config(sensor_block(c, n));
        });
        const double gamma = sc.channel.mean_square_gain;
        const auto phi = level_probabilities(sc.quantizer, gamma);
        const double mae = mean_absolute_error(sc.quantizer, gamma);
        const std::string method = sensor_block(c, n).channel.quantizer.method;
        log << "sensor " << n << " (" << method << ", gamma=" << gamma << "): boundaries";
        for (std::size_t l = 0; l < sc.quantizer.levels(); ++l) {
            log << ' ' << sc.quantizer.lower(l);
            csv << n << ',' << method << ',' << l << ',' << sc.quantizer.lower(l) << ',' << sc.quantizer.upper(l)
                << ',' << phi[l] << ',' << mae << '\n';
        }
        log << " | phi";
        for (double p : phi) log << ' ' << p;
        log << " | MAE " << mae << '\n';
    }
    write_file(fs::path(out_dir) / "quantizer.csv", csv.str());
}

void cmd_solve(const ExperimentConfig& c, SolveMode mode, const std::string& out_dir, bool plotdata,
               std::ostream& log) {
    ensure_dir(out_dir);
    const NetworkModel net = build_network(c);
    const SolvedPolicy sp = solve_policy(net, c, mode);
    const std::string hash = model_hash(c);
    const fs::path dir(out_dir);

    std::ostringstream rewards;
    for (std::size_t n = 0; n < net.size(); ++n) net.sensors[n].rewards.write_csv(rewards, n, n == 0);
    write_file(dir / "rewards.csv", rewards.str());

    if (sp.per_slot_random) {
        log << "random policy table exceeds the memory budget; simulate draws spends per slot\n";
    } else if (sp.policy.kind == NetworkPolicy::Kind::Global) {
        std::ostringstream os;
        write_policy(os, {kPolicyFormatVersion, hash, sp.policy.global, dims_of(net)});
        write_file(dir / policy_file_name(PolicyScope::Global, 0), os.str());
    } else {
        const auto dims = dims_of(net);
        for (std::size_t n = 0; n < net.size(); ++n) {
            std::ostringstream os;
            write_policy(os, {kPolicyFormatVersion, hash, sp.policy.local[n], {dims[n]}});
            write_file(dir / policy_file_name(PolicyScope::Local, n), os.str());
        }
    }

    json summary = {{"mode", to_string(mode)}, {"model_hash", hash}, {"sensors", net.size()},
                    {"global_states", net.global_state_count()}};
    if (sp.report) {
        const SolveReport& r = *sp.report;
        std::ostringstream res, mul;
        write_residuals_csv(res, r);
        write_multipliers_csv(mul, r);
        write_file(dir / "residuals.csv", res.str());
        write_file(dir / "multipliers.csv", mul.str());
        summary["dual_iterations"] = r.dual_iterations;
        summary["sweeps"] = r.sweeps;
        summary["final_residual"] = r.final_residual;
        summary["residual_threshold"] = bellman_threshold(c.solver.eps1, c.eta);
        summary["projected_states"] = r.projected_states;
        summary["seconds"] = r.seconds;
        double lmax = 0.0;
        for (double l : r.lambdas) lmax = std::max(lmax, l);
        summary["lambda_max"] = lmax;
        log << to_string(mode) << ": converged after " << r.dual_iterations << " dual iterations, " << r.sweeps
            << " sweeps, final residual " << r.final_residual << ", max lambda " << lmax << '\n';
    } else {
        log << "random: policy drawn with seed " << c.mc.seed << '\n';
    }
    write_file(dir / "solve_summary.json", summary.dump(2) + "\n");

    if (plotdata && !sp.per_slot_random) {
        std::ostringstream os;
        os << "series,x,metric,value,se\n";
        write_policy_plotdata(net, sp.policy, to_string(mode), os);
        write_file(dir / "fig4.csv", os.str());
    }
}

void cmd_simulate(const ExperimentConfig& c, SolveMode mode, const std::string& policy_dir,
                  const std::string& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    const NetworkModel net = build_network(c);
    SolvedPolicy sp;
    if (policy_dir.empty()) {
        sp = solve_policy(net, c, mode);
    } else {
        const std::string hash = model_hash(c);
        auto load = [&](PolicyScope scope, std::size_t n) {
            const fs::path path = fs::path(policy_dir) / policy_file_name(scope, n);
            std::ifstream is(path);
            if (!is) throw ConfigError("policy file not found: expected " + path.string());
            PolicyFile f = read_policy(is);
            if (f.model_hash != hash)
                throw ConfigError("policy file " + path.string() + " was solved for a different model (hash " +
                                  f.model_hash + ", config " + hash + ")");
            check_policy(f, net);
            return f.policy;
        };
        if (mode == SolveMode::Suboptimal) {
            sp.policy.kind = NetworkPolicy::Kind::Decentralized;
            for (std::size_t n = 0; n < net.size(); ++n) sp.policy.local.push_back(load(PolicyScope::Local, n));
        } else {
            sp.policy.kind = NetworkPolicy::Kind::Global;
            sp.policy.global = load(PolicyScope::Global, 0);
        }
    }
    const McEstimate e = simulate_policy(net, c, sp);
    std::ostringstream os;
    write_mc_header(os);
    write_mc_row(os, {"none", 0.0, e});
    write_file(fs::path(out_dir) / ("simulate_" + to_string(mode) + ".csv"), os.str());
    log << to_string(mode) << ": P_e " << e.p_e << " (se " << e.p_e_se << "), avg J " << e.avg_j << " (se "
        << e.avg_j_se << "), avg power " << e.avg_power_mw << " mW, budget violations " << e.violations << "/"
        << e.runs << '\n';
}

void cmd_sweep(const ExperimentConfig& c, const std::string& out_dir, bool plotdata, std::ostream& log) {
    if (c.sweep.axis.empty() || c.sweep.values.empty()) throw ConfigError("sweep block needs axis and values");
    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    const std::size_t workers = std::max<std::size_t>(1, c.mc.workers);
    std::map<std::string, std::vector<SweepRow>> results;
    for (const auto& m : c.sweep.modes) {
        const SolveMode mode = solve_mode_from_string(m);
        auto eval = [&](double v) {
            ExperimentConfig point = with_axis_value(c, c.sweep.axis, v);
            if (workers > 1) point.mc.workers = 1;
            const NetworkModel net = build_network(point);
            return simulate_policy(net, point, solve_policy(net, point, mode));
        };
        auto rows = sweep(c.sweep.axis, c.sweep.values, eval, workers);
        std::ostringstream os;
        write_mc_header(os);
        for (const auto& r : rows) {
            write_mc_row(os, r);
            log << m << ' ' << r.axis << '=' << r.value << ": P_e " << r.estimate.p_e << ", avg J " << r.estimate.avg_j
                << '\n';
        }
        write_file(dir / ("sweep_" + m + ".csv"), os.str());
        results[m] = std::move(rows);
    }
    if (!plotdata) return;
    std::ostringstream os;
    os.precision(12);
    os << "series,x,metric,value,se\n";
    for (const auto& m : c.sweep.modes)
        for (const auto& r : results[m]) {
            const auto& e = r.estimate;
            os << m << ',' << r.value << ",p_e," << e.p_e << ',' << e.p_e_se << '\n';
            os << m << ',' << r.value << ",avg_j," << e.avg_j << ',' << e.avg_j_se << '\n';
            os << m << ',' << r.value << ",avg_power_mw," << e.avg_power_mw << ",0\n";
        }
    for (const auto& name : figure_names(c, c.sweep.axis)) write_file(dir / (name + ".csv"), os.str());
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
        dynamic_cast<const ModelValidityError*>(&e))
        return 2;
    if (dynamic_cast<const ConvergenceError*>(&e)) return 3;
    if (dynamic_cast<const GuardError*>(&e)) return 4;
    return 1;
}

}  // namespace ehpc
