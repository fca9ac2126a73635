#include "stopflow/surface.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>

namespace stopflow {

namespace {

constexpr char kMagic[5] = {'S', 'T', 'P', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

void put_f(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
double get_f(std::istream& is) {
    double v;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

void append_g17(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

void SolverSettings::validate() const {
    if (!(psor_omega > 0.0 && psor_omega < 2.0))
        throw InvariantError("psor_omega must lie in (0, 2)");
    if (!(tol_pde_rel > 0.0 && tol_obstacle_rel > 0.0))
        throw InvariantError("solver tolerances must be positive");
    if (!(theta >= 0.5 && theta <= 1.0))
        throw InvariantError("theta scheme weight must lie in [0.5, 1]");
    if (!(stationary_tol > 0.0)) throw InvariantError("stationary_tol must be positive");
    if (!(stationary_dt > 0.0)) throw InvariantError("stationary_dt must be positive");
}

void ValueSurface::write_csv(std::ostream& os) const {
    std::string out = action.empty() ? "t,x,value,region,residual\n"
                                     : "t,x,value,region,residual,action\n";
    for (std::size_t it = 0; it < grid.nt(); ++it) {
        for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
            std::size_t k = idx(it, ix);
            append_g17(out, grid.t_nodes[it]);
            out += ',';
            append_g17(out, grid.x_nodes[ix]);
            out += ',';
            append_g17(out, values[k]);
            out += ',';
            out += (region[k] == Region::Stop ? "STOP" : "CONTINUE");
            out += ',';
            append_g17(out, residual[k]);
            if (!action.empty()) {
                out += ',';
                out += action_labels.empty() ? std::to_string(action[k])
                                             : action_labels[static_cast<std::size_t>(action[k])];
            }
            out += '\n';
        }
    }
    os << out;
}

void ValueSurface::write_binary(std::ostream& os) const {
    os.write(kMagic, sizeof kMagic);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(grid.nt()));
    put_u32(os, static_cast<std::uint32_t>(grid.nx()));
    put_u32(os, action.empty() ? 0u : 1u);
    for (double t : grid.t_nodes) put_f(os, t);
    for (double x : grid.x_nodes) put_f(os, x);
    for (double v : values) put_f(os, v);
    for (double g : obstacle) put_f(os, g);
    for (double r : residual) put_f(os, r);
    for (Region r : region) os.put(static_cast<char>(r));
    if (!action.empty()) {
        for (std::int32_t a : action)
            os.write(reinterpret_cast<const char*>(&a), sizeof a);
        put_u32(os, static_cast<std::uint32_t>(action_labels.size()));
        for (const auto& s : action_labels) {
            put_u32(os, static_cast<std::uint32_t>(s.size()));
            os.write(s.data(), static_cast<std::streamsize>(s.size()));
        }
    }
    put_f(os, scale);
    os.put(terminal_is_payoff ? 1 : 0);
}

ValueSurface ValueSurface::read_binary(std::istream& is) {
    char magic[5];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw InvariantError("not a STPF1 surface file");
    std::uint32_t version = get_u32(is);
    if (version != kVersion) throw InvariantError("unsupported STPF1 version");
    std::uint32_t nt = get_u32(is), nx = get_u32(is), has_action = get_u32(is);
    ValueSurface s;
    s.grid.t_nodes.resize(nt);
    s.grid.x_nodes.resize(nx);
    for (auto& t : s.grid.t_nodes) t = get_f(is);
    for (auto& x : s.grid.x_nodes) x = get_f(is);
    std::size_t n = static_cast<std::size_t>(nt) * nx;
    s.values.resize(n);
    s.obstacle.resize(n);
    s.residual.resize(n);
    s.region.resize(n);
    for (auto& v : s.values) v = get_f(is);
    for (auto& g : s.obstacle) g = get_f(is);
    for (auto& r : s.residual) r = get_f(is);
    for (auto& r : s.region) r = static_cast<Region>(is.get());
    if (has_action) {
        s.action.resize(n);
        for (auto& a : s.action) is.read(reinterpret_cast<char*>(&a), sizeof a);
        std::uint32_t n_labels = get_u32(is);
        s.action_labels.resize(n_labels);
        for (auto& lbl : s.action_labels) {
            std::uint32_t len = get_u32(is);
            lbl.resize(len);
            is.read(lbl.data(), len);
        }
    }
    s.scale = get_f(is);
    s.terminal_is_payoff = is.get() != 0;
    if (!is) throw InvariantError("truncated STPF1 surface file");
    return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

ValueSurface ValueSurface::read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InvariantError("empty surface CSV");
    bool has_action = line.find(",action") != std::string::npos;

    struct Row {
        double t, x, v, r;
        Region region;
        std::string action;
    };
    std::vector<Row> rows;
    std::vector<double> ts, xs;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() < 5) throw InvariantError("surface CSV row has too few columns");
        Row row;
        row.t = std::stod(cells[0]);
        row.x = std::stod(cells[1]);
        row.v = std::stod(cells[2]);
        row.region = cells[3] == "STOP" ? Region::Stop : Region::Continue;
        row.r = std::stod(cells[4]);
        if (has_action && cells.size() > 5) row.action = cells[5];
        rows.push_back(row);
        if (ts.empty() || row.t > ts.back()) ts.push_back(row.t);
        if (ts.size() == 1) xs.push_back(row.x);
    }
    ValueSurface s;
    s.grid.t_nodes = ts;
    s.grid.x_nodes = xs;
    std::size_t n = ts.size() * xs.size();
    if (rows.size() != n) throw InvariantError("surface CSV is not a full grid");
    s.values.resize(n);
    s.obstacle.assign(n, 0.0);
    s.region.resize(n);
    s.residual.resize(n);
    std::vector<std::string> labels;
    if (has_action) s.action.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        s.values[k] = rows[k].v;
        s.region[k] = rows[k].region;
        s.residual[k] = rows[k].r;
        if (has_action) {
            auto it = std::find(labels.begin(), labels.end(), rows[k].action);
            if (it == labels.end()) {
                labels.push_back(rows[k].action);
                it = labels.end() - 1;
            }
            s.action[k] = static_cast<std::int32_t>(it - labels.begin());
        }
    }
    s.action_labels = labels;
    return s;
}

void FreeBoundary::write_csv(std::ostream& os) const {
    std::string out = "t,b_lower,b_upper\n";
    for (std::size_t i = 0; i < t_nodes.size(); ++i) {
        append_g17(out, t_nodes[i]);
        out += ',';
        if (present(lower[i])) append_g17(out, lower[i]);
        out += ',';
        if (present(upper[i])) append_g17(out, upper[i]);
        out += '\n';
    }
    os << out;
}

FreeBoundary FreeBoundary::read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InvariantError("empty boundary CSV");
    FreeBoundary fb;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 3) throw InvariantError("boundary CSV rows need 3 columns");
        fb.t_nodes.push_back(std::stod(cells[0]));
        fb.lower.push_back(cells[1].empty() ? kNoBoundary : std::stod(cells[1]));
        fb.upper.push_back(cells[2].empty() ? kNoBoundary : std::stod(cells[2]));
        fb.lower_at_edge.push_back(false);
        fb.upper_at_edge.push_back(false);
    }
    for (std::size_t k = 1; k < fb.t_nodes.size(); ++k) {
        if (present(fb.lower[k]) && present(fb.lower[k - 1]))
            fb.max_jump = std::fmax(fb.max_jump, std::abs(fb.lower[k] - fb.lower[k - 1]));
        if (present(fb.upper[k]) && present(fb.upper[k - 1]))
            fb.max_jump = std::fmax(fb.max_jump, std::abs(fb.upper[k] - fb.upper[k - 1]));
    }
    return fb;
}

}  // namespace stopflow
