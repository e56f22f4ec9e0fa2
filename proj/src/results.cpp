#include "arl/results.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "arl/errors.hpp"

namespace arl {

using nlohmann::json;

std::string format_double(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << content;
    out.flush();
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

// ---------------------------------------------------------------------------
// CSV logs

std::string grid_log_csv(const RunLog& log) {
    std::string out = std::string(kGridLogHeader) + "\n";
    for (const StepRecord& rec : log.records) {
        const PowerFlowSolution& sol = rec.solution;
        for (std::size_t bus = 0; bus < sol.v_pu.size(); ++bus) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            const bool ok = sol.converged;
            out += std::to_string(rec.t) + "," + std::to_string(bus) + "," + format_double(ok ? sol.v_pu[bus] : nan) +
                   "," + format_double(ok ? sol.theta_rad[bus] : nan) + "," +
                   format_double(ok ? sol.p_inj_pu[bus] : nan) + "," + format_double(ok ? sol.q_inj_pu[bus] : nan) +
                   "\n";
        }
    }
    return out;
}

std::string agent_log_csv(const RunLog& log) {
    std::string out = std::string(kAgentLogHeader) + "\n";
    for (const StepRecord& rec : log.records) {
        std::string inputs;
        for (std::size_t i = 0; i < rec.x.size(); ++i) {
            if (i > 0) inputs += ";";
            inputs += format_double(rec.x[i]);
        }
        std::string outputs;
        for (std::size_t i = 0; i < rec.y.size(); ++i) {
            if (i > 0) outputs += ";";
            outputs += to_string(rec.y[i]);
        }
        out += std::to_string(rec.t) + "," + rec.agent_id + "," + inputs + "," + outputs + "," +
               format_double(rec.reward) + "\n";
    }
    return out;
}

void write_grid_log(const RunLog& log, const std::string& path) {
    write_text_file(path, grid_log_csv(log));
}

void write_agent_log(const RunLog& log, const std::string& path) {
    write_text_file(path, agent_log_csv(log));
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : text) {
        if (c == sep) {
            parts.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    parts.push_back(std::move(current));
    return parts;
}

std::vector<std::string> csv_lines(const std::string& text, const std::string& header, const std::string& path) {
    std::vector<std::string> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    if (lines.empty() || lines.front() != header) {
        throw IoError("'" + path + "' does not start with header '" + header + "'");
    }
    lines.erase(lines.begin());
    return lines;
}

double parse_double(const std::string& text, const std::string& where) {
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) {
        throw IoError(where + ": not a number '" + text + "'");
    }
    return value;
}

std::size_t parse_index(const std::string& text, const std::string& where) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
        throw IoError(where + ": not an index '" + text + "'");
    }
    return static_cast<std::size_t>(std::stoull(text));
}

}  // namespace

RunLog read_run_log(const std::string& grid_log_path, const std::string& agent_log_path,
                    const ExperimentConfig& cfg) {
    RunLog log;
    log.config = cfg;
    log.fingerprint = config_fingerprint(cfg);
    log.initial_world = WorldState::initial(cfg.grid);

    std::map<std::size_t, PowerFlowSolution> solutions;
    const auto grid_rows = csv_lines(read_text_file(grid_log_path), kGridLogHeader, grid_log_path);
    for (std::size_t i = 0; i < grid_rows.size(); ++i) {
        const std::string where = grid_log_path + ":" + std::to_string(i + 2);
        const auto cells = split(grid_rows[i], ',');
        if (cells.size() != 6) {
            throw IoError(where + ": expected 6 columns");
        }
        PowerFlowSolution& sol = solutions[parse_index(cells[0], where)];
        if (parse_index(cells[1], where) != sol.v_pu.size()) {
            throw IoError(where + ": buses out of order");
        }
        sol.v_pu.push_back(parse_double(cells[2], where));
        sol.theta_rad.push_back(parse_double(cells[3], where));
        sol.p_inj_pu.push_back(parse_double(cells[4], where));
        sol.q_inj_pu.push_back(parse_double(cells[5], where));
    }
    for (auto& [step, sol] : solutions) {
        sol.converged = !sol.v_pu.empty() && !std::isnan(sol.v_pu.front());
        sol.status = sol.converged ? SolverStatus::converged : SolverStatus::diverged;
    }

    const auto agent_rows = csv_lines(read_text_file(agent_log_path), kAgentLogHeader, agent_log_path);
    for (std::size_t i = 0; i < agent_rows.size(); ++i) {
        const std::string where = agent_log_path + ":" + std::to_string(i + 2);
        const auto cells = split(agent_rows[i], ',');
        if (cells.size() != 5) {
            throw IoError(where + ": expected 5 columns");
        }
        StepRecord rec;
        rec.t = parse_index(cells[0], where);
        rec.agent_id = cells[1];
        const auto it = std::find_if(cfg.agents.begin(), cfg.agents.end(),
                                     [&](const AgentSpec& a) { return a.id == rec.agent_id; });
        if (it == cfg.agents.end()) {
            throw IoError(where + ": agent '" + rec.agent_id + "' is not in the config");
        }
        rec.agent_index = static_cast<std::size_t>(it - cfg.agents.begin());
        for (const std::string& v : split(cells[2], ';')) rec.x.push_back(parse_double(v, where));
        for (const std::string& label : split(cells[3], ';')) {
            try {
                rec.y.push_back(action_label_from_string(label));
            } catch (const ConfigError& e) {
                throw IoError(where + ": " + e.what());
            }
        }
        rec.reward = parse_double(cells[4], where);
        const auto sol = solutions.find(rec.t);
        if (sol == solutions.end()) {
            throw IoError(where + ": step " + std::to_string(rec.t) + " missing from the grid log");
        }
        rec.solution = sol->second;
        rec.degraded = !rec.solution.converged;
        rec.p_world = system_performance(rec.solution, cfg.performance);
        log.records.push_back(std::move(rec));
    }
    return log;
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<std::size_t> cumulative_positive(const std::vector<double>& rewards) {
    std::vector<std::size_t> out;
    out.reserve(rewards.size());
    std::size_t count = 0;
    for (double r : rewards) {
        if (r > 0.0) ++count;
        out.push_back(count);
    }
    return out;
}

std::vector<double> MetricsReport::performance_by_step() const {
    std::vector<double> p;
    p.reserve(performance_series.size() + 1);
    p.push_back(initial_performance);
    p.insert(p.end(), performance_series.begin(), performance_series.end());
    return p;
}

MetricsReport compute_metrics(const RunLog& log) {
    const ExperimentConfig& cfg = log.config;
    MetricsReport m;
    m.name = cfg.name;
    m.seed = cfg.seed;
    m.rounds = cfg.schedule.rounds;
    m.steps_per_turn = cfg.schedule.steps_per_turn;
    m.fingerprint = log.fingerprint;
    m.performance = cfg.performance;
    m.initial_performance = system_performance(log.initial_world, cfg.performance);

    std::map<std::string, std::size_t> counts;
    for (const AgentSpec& spec : cfg.agents) {
        counts[spec.id] = 0;
        m.cumulative_positive_rewards[spec.id] = {};
    }
    for (const StepRecord& rec : log.records) {
        m.steps.push_back(rec.t);
        m.agent.push_back(rec.agent_id);
        m.performance_series.push_back(rec.p_world);
        m.mean_voltage.push_back(rec.solution.converged ? mean(rec.solution.v_pu)
                                                        : std::numeric_limits<double>::quiet_NaN());
        if (rec.reward > 0.0) {
            ++counts[rec.agent_id];
        }
        for (auto& [id, series] : m.cumulative_positive_rewards) {
            series.push_back(counts[id]);
        }
        if (!m.attack_success_step && attack_successful(rec.solution, cfg.performance)) {
            m.attack_success_step = rec.t;
        }
        m.operational_phase.push_back(classify_operational_phase(rec.solution, cfg.performance));
    }
    if (!m.performance_series.empty()) {
        m.resilience_phases = classify_resilience_phases(m.performance_series, cfg.performance);
        for (PhaseSegment& seg : m.resilience_phases) {
            seg.start = m.steps[seg.start];
            seg.end = m.steps[seg.end];
        }
    }
    return m;
}

namespace {

double json_double(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

OperationalPhase operational_phase_from_string(const std::string& text) {
    for (auto p : {OperationalPhase::normal, OperationalPhase::alert, OperationalPhase::emergency,
                   OperationalPhase::blackout}) {
        if (text == to_string(p)) return p;
    }
    throw IoError("unknown operational phase '" + text + "'");
}

ResiliencePhase resilience_phase_from_string(const std::string& text) {
    for (auto p : {ResiliencePhase::plan, ResiliencePhase::absorb, ResiliencePhase::recover,
                   ResiliencePhase::adapt}) {
        if (text == to_string(p)) return p;
    }
    throw IoError("unknown resilience phase '" + text + "'");
}

}  // namespace

std::string metrics_to_json(const MetricsReport& m) {
    json phases = json::array();
    for (OperationalPhase p : m.operational_phase) phases.push_back(to_string(p));
    json segments = json::array();
    for (const PhaseSegment& s : m.resilience_phases) {
        segments.push_back({{"phase", to_string(s.phase)}, {"start", s.start}, {"end", s.end}, {"event", s.event}});
    }
    json doc{{"name", m.name},
             {"seed", m.seed},
             {"rounds", m.rounds},
             {"steps_per_turn", m.steps_per_turn},
             {"fingerprint", m.fingerprint},
             {"performance_config",
              {{"p_star", m.performance.p_star},
               {"p_fail", m.performance.p_fail},
               {"v_lo", m.performance.v_lo},
               {"v_hi", m.performance.v_hi}}},
             {"steps", m.steps},
             {"agent", m.agent},
             {"initial_performance", m.initial_performance},
             {"performance", m.performance_series},
             {"mean_voltage", m.mean_voltage},
             {"cumulative_positive_rewards", m.cumulative_positive_rewards},
             {"attack_success_step", m.attack_success_step ? json(*m.attack_success_step) : json(nullptr)},
             {"operational_phase", phases},
             {"resilience_phases", segments}};
    return doc.dump(2) + "\n";
}

MetricsReport metrics_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("metrics JSON: ") + e.what());
    }
    try {
        MetricsReport m;
        m.name = doc.at("name").get<std::string>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.rounds = doc.at("rounds").get<std::size_t>();
        m.steps_per_turn = doc.at("steps_per_turn").get<std::size_t>();
        m.fingerprint = doc.at("fingerprint").get<std::string>();
        const json& pc = doc.at("performance_config");
        m.performance = {pc.at("p_star").get<double>(), pc.at("p_fail").get<double>(), pc.at("v_lo").get<double>(),
                         pc.at("v_hi").get<double>()};
        m.steps = doc.at("steps").get<std::vector<std::size_t>>();
        m.agent = doc.at("agent").get<std::vector<std::string>>();
        m.initial_performance = doc.at("initial_performance").get<double>();
        for (const json& v : doc.at("performance")) m.performance_series.push_back(json_double(v));
        for (const json& v : doc.at("mean_voltage")) m.mean_voltage.push_back(json_double(v));
        m.cumulative_positive_rewards =
            doc.at("cumulative_positive_rewards").get<std::map<std::string, std::vector<std::size_t>>>();
        if (!doc.at("attack_success_step").is_null()) {
            m.attack_success_step = doc.at("attack_success_step").get<std::size_t>();
        }
        for (const json& p : doc.at("operational_phase")) {
            m.operational_phase.push_back(operational_phase_from_string(p.get<std::string>()));
        }
        for (const json& s : doc.at("resilience_phases")) {
            m.resilience_phases.push_back({resilience_phase_from_string(s.at("phase").get<std::string>()),
                                           s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
                                           s.at("event").get<std::size_t>()});
        }
        return m;
    } catch (const json::exception& e) {
        throw IoError(std::string("metrics JSON: ") + e.what());
    }
}

MetricsReport read_metrics_file(const std::string& path) {
    return metrics_from_json(read_text_file(path));
}

void write_metrics(const MetricsReport& report, const std::string& path) {
    write_text_file(path, metrics_to_json(report));
}

// ---------------------------------------------------------------------------
// SVG plot

PlotSeries select_series(const MetricsReport& report, const std::string& name, std::optional<std::size_t> from,
                         std::optional<std::size_t> to) {
    PlotSeries series;
    std::vector<double> values;
    const std::string cumulative_prefix = "cumulative_positive:";
    if (name == "mean_voltage") {
        series.title = "Mean voltage";
        series.y_label = "mean voltage [pu]";
        values = report.mean_voltage;
    } else if (name == "performance") {
        series.title = "System performance";
        series.y_label = "p(m_t)";
        values = report.performance_series;
    } else if (name.starts_with(cumulative_prefix)) {
        const std::string id = name.substr(cumulative_prefix.size());
        const auto it = report.cumulative_positive_rewards.find(id);
        if (it == report.cumulative_positive_rewards.end()) {
            throw ContractError("no agent '" + id + "' in metrics");
        }
        series.title = "Cumulative positive rewards (" + id + ")";
        series.y_label = "count";
        values.assign(it->second.begin(), it->second.end());
    } else {
        throw ContractError("unknown series '" + name +
                            "' (expected mean_voltage, performance or cumulative_positive:<agent>)");
    }
    for (std::size_t i = 0; i < values.size() && i < report.steps.size(); ++i) {
        const std::size_t step = report.steps[i];
        if ((from && step < *from) || (to && step > *to)) {
            continue;
        }
        series.x.push_back(static_cast<double>(step));
        series.y.push_back(values[i]);
    }
    if (series.x.empty()) {
        throw ContractError("series '" + name + "' has no points in the requested window");
    }
    return series;
}

namespace {

std::string fmt(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, value);
    return buf;
}

std::string escape_xml(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const PlotSeries& series) {
    if (series.x.empty() || series.x.size() != series.y.size()) {
        throw ContractError("plot needs a non-empty series with matching x and y");
    }
    constexpr double left = 80.0;
    constexpr double right = 30.0;
    constexpr double top = 40.0;
    constexpr double bottom = 40.0;
    const double plot_w = kPlotWidth - left - right;
    const double plot_h = kPlotHeight - top - bottom;

    double x_min = *std::min_element(series.x.begin(), series.x.end());
    double x_max = *std::max_element(series.x.begin(), series.x.end());
    if (x_max == x_min) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -std::numeric_limits<double>::infinity();
    for (double v : series.y) {
        if (std::isfinite(v)) {
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    }
    if (!std::isfinite(y_min)) {
        y_min = 0.0;
        y_max = 1.0;
    }
    if (y_max == y_min) {
        // Flat series sits at mid-height.
        const double pad = y_min == 0.0 ? 1.0 : std::abs(y_min) * 0.05;
        y_min -= pad;
        y_max += pad;
    } else {
        const double pad = (y_max - y_min) * 0.05;
        y_min -= pad;
        y_max += pad;
    }

    auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return top + (y_max - y) / (y_max - y_min) * plot_h; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kPlotWidth) + "\" height=\"" +
           std::to_string(kPlotHeight) + "\" viewBox=\"0 0 " + std::to_string(kPlotWidth) + " " +
           std::to_string(kPlotHeight) + "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(kPlotWidth) + "\" height=\"" +
           std::to_string(kPlotHeight) + "\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt("%.2f", left + plot_w / 2) +
           "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
           escape_xml(series.title) + "</text>\n";

    // Axes
    svg += "<g stroke=\"black\" stroke-width=\"1\">\n";
    svg += "<line x1=\"" + fmt("%.2f", left) + "\" y1=\"" + fmt("%.2f", top) + "\" x2=\"" + fmt("%.2f", left) +
           "\" y2=\"" + fmt("%.2f", top + plot_h) + "\"/>\n";
    svg += "<line x1=\"" + fmt("%.2f", left) + "\" y1=\"" + fmt("%.2f", top + plot_h) + "\" x2=\"" +
           fmt("%.2f", left + plot_w) + "\" y2=\"" + fmt("%.2f", top + plot_h) + "\"/>\n";
    svg += "</g>\n";

    constexpr int ticks = 5;
    svg += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i < ticks; ++i) {
        const double frac = static_cast<double>(i) / (ticks - 1);
        const double yv = y_min + frac * (y_max - y_min);
        const double yp = py(yv);
        svg += "<line x1=\"" + fmt("%.2f", left - 4) + "\" y1=\"" + fmt("%.2f", yp) + "\" x2=\"" + fmt("%.2f", left) +
               "\" y2=\"" + fmt("%.2f", yp) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + fmt("%.2f", left - 6) + "\" y=\"" + fmt("%.2f", yp + 4) + "\" text-anchor=\"end\">" +
               fmt("%.4g", yv) + "</text>\n";
        const double xv = x_min + frac * (x_max - x_min);
        const double xp = px(xv);
        svg += "<line x1=\"" + fmt("%.2f", xp) + "\" y1=\"" + fmt("%.2f", top + plot_h) + "\" x2=\"" + fmt("%.2f", xp) +
               "\" y2=\"" + fmt("%.2f", top + plot_h + 4) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + fmt("%.2f", xp) + "\" y=\"" + fmt("%.2f", top + plot_h + 16) +
               "\" text-anchor=\"middle\">" + fmt("%.6g", xv) + "</text>\n";
    }
    svg += "<text x=\"" + fmt("%.2f", left + plot_w / 2) + "\" y=\"" + fmt("%.2f", kPlotHeight - 4.0) +
           "\" text-anchor=\"middle\">step</text>\n";
    svg += "<text x=\"14\" y=\"" + fmt("%.2f", top + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           fmt("%.2f", top + plot_h / 2) + ")\">" + escape_xml(series.y_label) + "</text>\n";
    svg += "</g>\n";

    // Non-finite samples split the line.
    std::string points;
    auto flush = [&]() {
        if (!points.empty()) {
            svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
            points.clear();
        }
    };
    for (std::size_t i = 0; i < series.x.size(); ++i) {
        if (!std::isfinite(series.y[i])) {
            flush();
            continue;
        }
        if (!points.empty()) points += " ";
        points += fmt("%.2f", px(series.x[i])) + "," + fmt("%.2f", py(series.y[i]));
    }
    flush();
    svg += "</svg>\n";
    return svg;
}

void emit_plot(const PlotSeries& series, const std::string& path) {
    write_text_file(path, render_svg(series));
}

}  // namespace arl
