#include "stopflow/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace stopflow {

namespace {

using nlohmann::ordered_json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Table read_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open table file '" + path + "'");
    Table tb;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty table file '" + path + "'");
    {
        std::stringstream ss(line);
        std::string cell;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            if (first) {
                first = false;  // corner cell, ignored
                continue;
            }
            tb.x_nodes.push_back(std::stod(cell));
        }
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            if (first) {
                tb.t_nodes.push_back(std::stod(cell));
                first = false;
                continue;
            }
            tb.values.push_back(std::stod(cell));
        }
    }
    return tb;
}

CoefficientField field_from_json(const ordered_json& j, const std::string& base_dir,
                                 const std::string& key) {
    try {
        if (j.is_number()) return CoefficientField::constant(j.get<double>());
        if (j.is_string()) {
            std::string s = j.get<std::string>();
            if (s.rfind("table:", 0) == 0)
                return CoefficientField::tabulated(read_table_csv(base_dir + "/" + s.substr(6)));
            return CoefficientField::expression(s);
        }
        if (j.is_object() && j.contains("table")) {
            const auto& t = j.at("table");
            Table tb;
            tb.t_nodes = t.at("t").get<std::vector<double>>();
            tb.x_nodes = t.at("x").get<std::vector<double>>();
            tb.values = t.at("values").get<std::vector<double>>();
            return CoefficientField::tabulated(std::move(tb));
        }
    } catch (const ExprError& e) {
        throw ConfigError("coefficient '" + key + "': " + e.what());
    } catch (const FieldError& e) {
        throw ConfigError("coefficient '" + key + "': " + e.what());
    }
    throw ConfigError("coefficient '" + key + "' must be a number, expression string, or table");
}

ordered_json field_to_json(const CoefficientField& f) {
    switch (f.kind()) {
        case CoefficientField::Kind::Constant: return f.constant_value();
        case CoefficientField::Kind::Expression: return f.expr().source();
        case CoefficientField::Kind::Tabulated: {
            const Table& t = f.table();
            return ordered_json{
                {"table",
                 ordered_json{{"t", t.t_nodes}, {"x", t.x_nodes}, {"values", t.values}}}};
        }
    }
    return nullptr;
}

ParsedConfig from_json(const ordered_json& j, const std::string& base_dir) {
    ParsedConfig cfg;
    StoppingProblem& p = cfg.problem;
    try {
        const auto& dom = j.at("domain");
        p.x_lo = dom.at("x_lo").get<double>();
        p.x_hi = dom.at("x_hi").get<double>();

        const auto& hor = j.at("horizon");
        std::string type = hor.at("type").get<std::string>();
        if (type == "perpetual")
            p.horizon = Horizon::forever();
        else if (type == "finite")
            p.horizon = Horizon::finite(hor.at("T").get<double>());
        else
            throw ConfigError("horizon type must be 'finite' or 'perpetual'");

        const auto& co = j.at("coefficients");
        p.mu = field_from_json(co.at("mu"), base_dir, "mu");
        p.sigma = field_from_json(co.at("sigma"), base_dir, "sigma");
        p.flow = field_from_json(co.at("flow"), base_dir, "flow");
        p.discount = field_from_json(co.at("discount"), base_dir, "discount");

        const auto& pay = j.at("payoff");
        p.payoff.branch_a = field_from_json(pay.at("branch_a"), base_dir, "branch_a");
        p.payoff.branch_b = field_from_json(pay.at("branch_b"), base_dir, "branch_b");
        if (pay.contains("x_c")) p.payoff.crossing_hint = pay.at("x_c").get<double>();

        if (j.contains("actions")) {
            for (const auto& ja : j.at("actions")) {
                ActionSpec a;
                a.label = ja.at("label").get<std::string>();
                a.mu = ja.contains("mu") ? field_from_json(ja.at("mu"), base_dir, "mu") : p.mu;
                a.sigma =
                    ja.contains("sigma") ? field_from_json(ja.at("sigma"), base_dir, "sigma")
                                         : p.sigma;
                a.flow =
                    ja.contains("flow") ? field_from_json(ja.at("flow"), base_dir, "flow") : p.flow;
                a.discount = ja.contains("discount")
                                 ? field_from_json(ja.at("discount"), base_dir, "discount")
                                 : p.discount;
                p.actions.push_back(std::move(a));
            }
        }

        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            if (g.contains("nt")) cfg.grid.nt = g.at("nt").get<std::size_t>();
            if (g.contains("nx")) cfg.grid.nx = g.at("nx").get<std::size_t>();
            if (g.contains("spacing")) {
                std::string s = g.at("spacing").get<std::string>();
                cfg.grid.spacing = s == "log" ? Spacing::Log
                                              : s == "custom" ? Spacing::Custom : Spacing::Uniform;
            }
        }
        if (j.contains("solve")) {
            const auto& s = j.at("solve");
            if (s.contains("mode")) cfg.solve.mode = s.at("mode").get<std::string>();
            if (s.contains("t_solve")) cfg.solve.t_solve = s.at("t_solve").get<double>();
            if (s.contains("t_report")) cfg.solve.t_report = s.at("t_report").get<double>();
            if (s.contains("stationary_seed"))
                cfg.solve.stationary_seed = s.at("stationary_seed").get<bool>();
        }
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("config structure error: ") + e.what());
    }
    p.validate();
    return cfg;
}

// --- key/value text rendering ------------------------------------------

struct TextDoc {
    // section -> key -> (value, line)
    std::map<std::string, std::map<std::string, std::pair<std::string, int>>> sections;
    std::vector<std::string> section_order;
};

TextDoc parse_text(const std::string& doc) {
    TextDoc out;
    std::stringstream ss(doc);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r");
        line = line.substr(a, b - a + 1);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
            section = line.substr(1, line.size() - 2);
            if (!out.sections.count(section)) out.section_order.push_back(section);
            out.sections[section];
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            std::size_t i = s.find_first_not_of(" \t");
            std::size_t j = s.find_last_not_of(" \t");
            s = i == std::string::npos ? "" : s.substr(i, j - i + 1);
        };
        trim(key);
        trim(val);
        if (key.empty() || val.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
            val = val.substr(1, val.size() - 2);
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        out.sections[section][key] = {val, lineno};
    }
    return out;
}

ordered_json text_to_json(const TextDoc& doc) {
    ordered_json j;
    auto get = [&](const std::string& sec,
                   const std::string& key) -> std::optional<std::string> {
        auto si = doc.sections.find(sec);
        if (si == doc.sections.end()) return std::nullopt;
        auto ki = si->second.find(key);
        if (ki == si->second.end()) return std::nullopt;
        return ki->second.first;
    };
    auto require = [&](const std::string& sec, const std::string& key) {
        auto v = get(sec, key);
        if (!v) throw ConfigError("missing key '" + key + "' in section [" + sec + "]");
        return *v;
    };
    auto as_number = [](const std::string& s, const std::string& what) {
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size())
            throw ConfigError("value of '" + what + "' is not a number: " + s);
        return v;
    };
    auto coeff = [&](const std::string& sec, const std::string& key) -> ordered_json {
        std::string v = require(sec, key);
        char* end = nullptr;
        double num = std::strtod(v.c_str(), &end);
        if (end == v.c_str() + v.size()) return num;
        return v;  // expression string or table:path
    };

    j["domain"] = {{"x_lo", as_number(require("domain", "x_lo"), "x_lo")},
                   {"x_hi", as_number(require("domain", "x_hi"), "x_hi")}};
    std::string type = require("horizon", "type");
    j["horizon"]["type"] = type;
    if (type == "finite") j["horizon"]["T"] = as_number(require("horizon", "T"), "T");
    j["coefficients"] = {{"mu", coeff("coefficients", "mu")},
                         {"sigma", coeff("coefficients", "sigma")},
                         {"flow", coeff("coefficients", "flow")},
                         {"discount", coeff("coefficients", "discount")}};
    j["payoff"]["branch_a"] = coeff("payoff", "branch_a");
    j["payoff"]["branch_b"] = coeff("payoff", "branch_b");
    if (auto xc = get("payoff", "x_c")) j["payoff"]["x_c"] = as_number(*xc, "x_c");

    for (const auto& sec : doc.section_order) {
        if (sec.rfind("actions.", 0) != 0) continue;
        ordered_json ja;
        ja["label"] = sec.substr(8);
        for (const char* key : {"mu", "sigma", "flow", "discount"})
            if (get(sec, key)) ja[key] = coeff(sec, key);
        j["actions"].push_back(ja);
    }

    if (doc.sections.count("grid")) {
        if (auto v = get("grid", "nt")) j["grid"]["nt"] = static_cast<std::size_t>(as_number(*v, "nt"));
        if (auto v = get("grid", "nx")) j["grid"]["nx"] = static_cast<std::size_t>(as_number(*v, "nx"));
        if (auto v = get("grid", "spacing")) j["grid"]["spacing"] = *v;
    }
    if (doc.sections.count("solve")) {
        if (auto v = get("solve", "mode")) j["solve"]["mode"] = *v;
        if (auto v = get("solve", "t_solve")) j["solve"]["t_solve"] = as_number(*v, "t_solve");
        if (auto v = get("solve", "t_report")) j["solve"]["t_report"] = as_number(*v, "t_report");
        if (auto v = get("solve", "stationary_seed")) j["solve"]["stationary_seed"] = (*v == "true");
    }
    return j;
}

}  // namespace

ParsedConfig parse_problem(const std::string& document, const std::string& base_dir) {
    std::size_t i = document.find_first_not_of(" \t\r\n");
    if (i == std::string::npos) throw ConfigError("empty config document");
    ordered_json j;
    if (document[i] == '{') {
        try {
            j = ordered_json::parse(document);
        } catch (const ordered_json::parse_error& e) {
            throw ConfigError(std::string("JSON syntax error: ") + e.what());
        }
    } else {
        j = text_to_json(parse_text(document));
    }
    return from_json(j, base_dir);
}

std::string print_problem(const ParsedConfig& cfg) {
    const StoppingProblem& p = cfg.problem;
    ordered_json j;
    j["domain"] = {{"x_lo", p.x_lo}, {"x_hi", p.x_hi}};
    if (p.horizon.perpetual)
        j["horizon"] = {{"type", "perpetual"}};
    else
        j["horizon"] = {{"type", "finite"}, {"T", p.horizon.T}};
    j["coefficients"] = {{"mu", field_to_json(p.mu)},
                         {"sigma", field_to_json(p.sigma)},
                         {"flow", field_to_json(p.flow)},
                         {"discount", field_to_json(p.discount)}};
    j["payoff"]["branch_a"] = field_to_json(p.payoff.branch_a);
    j["payoff"]["branch_b"] = field_to_json(p.payoff.branch_b);
    if (p.payoff.crossing_hint) j["payoff"]["x_c"] = *p.payoff.crossing_hint;
    if (!p.actions.empty()) {
        j["actions"] = ordered_json::array();
        for (const auto& a : p.actions)
            j["actions"].push_back(ordered_json{{"label", a.label},
                                                {"mu", field_to_json(a.mu)},
                                                {"sigma", field_to_json(a.sigma)},
                                                {"flow", field_to_json(a.flow)},
                                                {"discount", field_to_json(a.discount)}});
    }
    j["grid"] = {{"nt", cfg.grid.nt},
                 {"nx", cfg.grid.nx},
                 {"spacing", cfg.grid.spacing == Spacing::Log
                                 ? "log"
                                 : cfg.grid.spacing == Spacing::Custom ? "custom" : "uniform"}};
    j["solve"] = {{"mode", cfg.solve.mode},
                  {"t_solve", cfg.solve.t_solve},
                  {"stationary_seed", cfg.solve.stationary_seed}};
    if (cfg.solve.t_report) j["solve"]["t_report"] = *cfg.solve.t_report;
    return j.dump(2) + "\n";
}

std::string print_problem_text(const ParsedConfig& cfg) {
    const StoppingProblem& p = cfg.problem;
    auto coeff = [](const CoefficientField& f) -> std::string {
        auto s = f.source();
        if (!s) throw ConfigError("text rendering supports expression and constant fields only");
        if (f.kind() == CoefficientField::Kind::Constant) return *s;
        return "\"" + *s + "\"";
    };
    std::string out;
    out += "[domain]\nx_lo = " + fmt(p.x_lo) + "\nx_hi = " + fmt(p.x_hi) + "\n\n";
    out += "[horizon]\ntype = \"" + std::string(p.horizon.perpetual ? "perpetual" : "finite") +
           "\"\n";
    if (!p.horizon.perpetual) out += "T = " + fmt(p.horizon.T) + "\n";
    out += "\n[coefficients]\n";
    out += "mu = " + coeff(p.mu) + "\n";
    out += "sigma = " + coeff(p.sigma) + "\n";
    out += "flow = " + coeff(p.flow) + "\n";
    out += "discount = " + coeff(p.discount) + "\n";
    out += "\n[payoff]\n";
    out += "branch_a = " + coeff(p.payoff.branch_a) + "\n";
    out += "branch_b = " + coeff(p.payoff.branch_b) + "\n";
    if (p.payoff.crossing_hint) out += "x_c = " + fmt(*p.payoff.crossing_hint) + "\n";
    for (const auto& a : p.actions) {
        out += "\n[actions." + a.label + "]\n";
        out += "mu = " + coeff(a.mu) + "\n";
        out += "sigma = " + coeff(a.sigma) + "\n";
        out += "flow = " + coeff(a.flow) + "\n";
        out += "discount = " + coeff(a.discount) + "\n";
    }
    out += "\n[grid]\nnt = " + std::to_string(cfg.grid.nt) + "\nnx = " + std::to_string(cfg.grid.nx) +
           "\nspacing = \"" +
           (cfg.grid.spacing == Spacing::Log
                ? "log"
                : cfg.grid.spacing == Spacing::Custom ? "custom" : "uniform") +
           "\"\n";
    out += "\n[solve]\nmode = \"" + cfg.solve.mode + "\"\nt_solve = " + fmt(cfg.solve.t_solve) +
           "\n";
    if (cfg.solve.t_report) out += "t_report = " + fmt(*cfg.solve.t_report) + "\n";
    out += std::string("stationary_seed = ") + (cfg.solve.stationary_seed ? "true" : "false") +
           "\n";
    return out;
}

}  // namespace stopflow
