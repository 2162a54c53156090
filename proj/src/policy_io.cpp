#include "ehpc/policy_io.hpp"

#include <iomanip>
#include <sstream>

#include "ehpc/errors.hpp"

namespace ehpc {

std::vector<SensorDims> dims_of(const NetworkModel& net) {
    std::vector<SensorDims> d;
    for (const auto& s : net.sensors) d.push_back({s.capacity(), s.levels(), s.harvest_states()});
    return d;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

void write_policy(std::ostream& os, const PolicyFile& file) {
    const Policy& p = file.policy;
    os << "# ehpc-policy v" << file.version << '\n';
    os << "# model_hash " << file.model_hash << '\n';
    if (p.scope == PolicyScope::Global) os << "# scope global\n";
    else os << "# scope local " << p.sensor << '\n';
    os << "# dims";
    for (const auto& d : file.dims) os << ' ' << d.capacity << ',' << d.levels << ',' << d.harvest_states;
    os << '\n';
    os << "state_index";
    for (std::size_t k = 1; k <= p.width(); ++k) os << ",spend_cells_" << k;
    os << '\n';
    for (std::size_t r = 0; r < p.rows(); ++r) {
        os << r;
        for (std::size_t k = 0; k < p.width(); ++k) os << ',' << p.spend(r, k);
        os << '\n';
    }
}

PolicyFile read_policy(std::istream& is) {
    PolicyFile f;
    std::string line;
    bool have_scope = false, have_dims = false, have_columns = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            ls >> key;
            if (key == "ehpc-policy") {
                std::string v;
                ls >> v;
                if (v.size() < 2 || v[0] != 'v') throw ConfigError("policy file: malformed version line");
                f.version = std::stoi(v.substr(1));
                if (f.version != kPolicyFormatVersion)
                    throw ConfigError("policy file: unsupported format version " + v);
            } else if (key == "model_hash") {
                ls >> f.model_hash;
            } else if (key == "scope") {
                std::string scope;
                ls >> scope;
                if (scope == "global") {
                    f.policy.scope = PolicyScope::Global;
                } else if (scope == "local") {
                    f.policy.scope = PolicyScope::Local;
                    ls >> f.policy.sensor;
                } else {
                    throw ConfigError("policy file: unknown scope '" + scope + "'");
                }
                have_scope = true;
            } else if (key == "dims") {
                std::string tok;
                while (ls >> tok) {
                    SensorDims d;
                    char c1 = 0, c2 = 0;
                    std::istringstream ts(tok);
                    ts >> d.capacity >> c1 >> d.levels >> c2 >> d.harvest_states;
                    if (!ts || c1 != ',' || c2 != ',') throw ConfigError("policy file: malformed dims '" + tok + "'");
                    f.dims.push_back(d);
                }
                have_dims = true;
            }
            continue;
        }
        if (!have_columns) {
            if (!have_scope || !have_dims) throw ConfigError("policy file: missing scope or dims header");
            for (const auto& d : f.dims)
                f.policy.state_counts.push_back(static_cast<std::size_t>(d.capacity + 1) * d.levels *
                                                d.harvest_states);
            if (f.policy.scope == PolicyScope::Local && f.policy.state_counts.size() != 1)
                throw ConfigError("policy file: local scope needs exactly one dims entry");
            have_columns = true;
            continue;
        }
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        const std::size_t row = std::stoul(cell);
        if (f.policy.width() == 0 || row != f.policy.rows())
            throw ConfigError("policy file: rows out of order at state " + cell);
        while (std::getline(ls, cell, ',')) f.policy.spends.push_back(std::stoi(cell));
        if (f.policy.spends.size() != (row + 1) * f.policy.width())
            throw ConfigError("policy file: wrong column count at state " + std::to_string(row));
        continue;
    }
    if (!have_scope || !have_dims) throw ConfigError("policy file: missing scope or dims header");
    return f;
}

void check_policy(const PolicyFile& file, const NetworkModel& net) {
    const auto expected = dims_of(net);
    const Policy& p = file.policy;
    auto same = [](const SensorDims& a, const SensorDims& b) {
        return a.capacity == b.capacity && a.levels == b.levels && a.harvest_states == b.harvest_states;
    };
    if (p.scope == PolicyScope::Global) {
        if (file.dims.size() != expected.size()) throw ConfigError("policy file: sensor count differs from config");
        for (std::size_t n = 0; n < expected.size(); ++n)
            if (!same(file.dims[n], expected[n])) throw ConfigError("policy file: dimensions differ from config");
    } else {
        if (p.sensor >= expected.size() || file.dims.size() != 1 || !same(file.dims[0], expected[p.sensor]))
            throw ConfigError("policy file: local dimensions differ from config");
    }
    std::vector<std::size_t> counts;
    if (p.scope == PolicyScope::Global) {
        for (const auto& s : net.sensors) counts.push_back(s.state_count());
    } else {
        counts.push_back(net.sensors[p.sensor].state_count());
    }
    const GlobalIndexer idx(counts);
    if (p.rows() != idx.size()) throw ConfigError("policy file: row count differs from the state space");
    std::vector<std::size_t> local;
    for (std::size_t r = 0; r < p.rows(); ++r) {
        idx.decode(r, local);
        double power = 0.0;
        for (std::size_t k = 0; k < p.width(); ++k) {
            const SensorModel& m = net.sensors[p.scope == PolicyScope::Global ? k : p.sensor];
            const int c = p.spend(r, k);
            if (c < 0 || c > m.decode(local[k]).battery)
                throw FeasibilityError("policy file: infeasible spend at state " + std::to_string(r));
            power += m.power_mw(c);
        }
        if (p.scope == PolicyScope::Global && power > net.p_tot_mw * (1.0 + 1e-12))
            throw FeasibilityError("policy file: total power above budget at state " + std::to_string(r));
    }
}

}  // namespace ehpc
