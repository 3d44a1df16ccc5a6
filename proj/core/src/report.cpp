#include "ctcc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ctcc {

const char* kReportCsvHeader = "experiment,stage,attack,params,seed,fsr_trigger,fsr_neg,ppl_benign";

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string format_row(const ReportRow& r) {
    for (const std::string* s : {&r.experiment, &r.stage, &r.attack, &r.params}) {
        if (s->find(',') != std::string::npos || s->find('\n') != std::string::npos) {
            throw std::invalid_argument("report fields must not contain commas or newlines: " + *s);
        }
    }
    std::ostringstream os;
    os << r.experiment << ',' << r.stage << ',' << r.attack << ',' << r.params << ',' << r.seed << ','
       << fmt(r.fsr_trigger) << ',' << fmt(r.fsr_neg) << ',' << fmt(r.ppl_benign);
    return os.str();
}

ReportRow parse_row(const std::string& line) {
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 8) throw std::invalid_argument("bad report row: " + line);
    ReportRow r;
    r.experiment = f[0];
    r.stage = f[1];
    r.attack = f[2];
    r.params = f[3];
    r.seed = std::stoull(f[4]);
    r.fsr_trigger = std::stod(f[5]);
    r.fsr_neg = std::stod(f[6]);
    r.ppl_benign = std::stod(f[7]);
    return r;
}

void append_rows(const std::filesystem::path& csv_path, const std::vector<ReportRow>& rows) {
    const bool fresh = !std::filesystem::exists(csv_path);
    std::ofstream f(csv_path, std::ios::binary | std::ios::app);
    if (!f) throw std::runtime_error("cannot open report csv: " + csv_path.string());
    if (fresh) f << kReportCsvHeader << '\n';
    for (const ReportRow& r : rows) f << format_row(r) << '\n';
}

std::vector<ReportRow> read_rows(const std::filesystem::path& csv_path) {
    std::ifstream f(csv_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open report csv: " + csv_path.string());
    std::vector<ReportRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == kReportCsvHeader) continue;
        }
        rows.push_back(parse_row(line));
    }
    return rows;
}

void append_timing(const std::filesystem::path& timings_path, const std::string& key, double seconds) {
    std::ofstream f(timings_path, std::ios::binary | std::ios::app);
    if (!f) throw std::runtime_error("cannot open timings file: " + timings_path.string());
    f << key << ' ' << fmt(seconds) << '\n';
}

std::vector<AggregateCell> aggregate_rows(const std::vector<ReportRow>& rows) {
    std::map<std::pair<std::string, std::string>, std::vector<const ReportRow*>> groups;
    for (const ReportRow& r : rows) groups[{r.attack, r.params}].push_back(&r);
    std::vector<AggregateCell> cells;
    for (const auto& [key, members] : groups) {
        AggregateCell c;
        c.attack = key.first;
        c.params = key.second;
        c.count = static_cast<int>(members.size());
        c.min_fsr_trigger = 1e300;
        c.max_fsr_trigger = -1e300;
        for (const ReportRow* r : members) {
            c.mean_fsr_trigger += r->fsr_trigger;
            c.mean_fsr_neg += r->fsr_neg;
            c.mean_ppl += r->ppl_benign;
            c.min_fsr_trigger = std::min(c.min_fsr_trigger, r->fsr_trigger);
            c.max_fsr_trigger = std::max(c.max_fsr_trigger, r->fsr_trigger);
        }
        c.mean_fsr_trigger /= c.count;
        c.mean_fsr_neg /= c.count;
        c.mean_ppl /= c.count;
        cells.push_back(std::move(c));
    }
    return cells;
}

namespace {

std::string param_value(const std::string& params, const std::string& name) {
    // params look like "alpha=0.9;strategy=task".
    std::stringstream ss(params);
    std::string item;
    while (std::getline(ss, item, ';')) {
        const size_t eq = item.find('=');
        if (eq != std::string::npos && item.substr(0, eq) == name) return item.substr(eq + 1);
    }
    return "";
}

}  // namespace

std::string render_markdown(const std::vector<ReportRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("render_markdown: no rows");
    std::ostringstream md;
    md << "# Experiment report\n";

    // Merge family pivot: one row per alpha, one column per strategy.
    std::set<std::string> strategies;
    std::set<std::string> alphas;
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> merge_cells;
    for (const ReportRow& r : rows) {
        if (r.attack != "merge") continue;
        const std::string strat = param_value(r.params, "strategy");
        const std::string alpha = param_value(r.params, "alpha");
        strategies.insert(strat);
        alphas.insert(alpha);
        auto& cell = merge_cells[{alpha, strat}];
        cell.first += r.fsr_trigger;
        cell.second += 1;
    }
    if (!merge_cells.empty()) {
        md << "\n## merge (mean FSR_trigger)\n\n| alpha |";
        for (const std::string& s : strategies) md << ' ' << s << " |";
        md << "\n|---|";
        for (size_t i = 0; i < strategies.size(); ++i) md << "---|";
        md << '\n';
        for (auto it = alphas.rbegin(); it != alphas.rend(); ++it) {
            md << "| " << *it << " |";
            for (const std::string& s : strategies) {
                auto found = merge_cells.find({*it, s});
                if (found == merge_cells.end() || found->second.second == 0) {
                    md << " - |";
                } else {
                    md << ' ' << fmt(found->second.first / found->second.second) << " |";
                }
            }
            md << '\n';
        }
    }

    // Everything else: aggregate rows grouped by attack family.
    std::set<std::string> families;
    for (const ReportRow& r : rows)
        if (r.attack != "merge") families.insert(r.attack);
    const std::vector<AggregateCell> cells = aggregate_rows(rows);
    for (const std::string& fam : families) {
        md << "\n## " << fam << "\n\n| params | n | mean FSR_trigger | min | max | mean FSR_neg | mean PPL |\n";
        md << "|---|---|---|---|---|---|---|\n";
        for (const AggregateCell& c : cells) {
            if (c.attack != fam) continue;
            md << "| " << (c.params.empty() ? "-" : c.params) << " | " << c.count << " | " << fmt(c.mean_fsr_trigger)
               << " | " << fmt(c.min_fsr_trigger) << " | " << fmt(c.max_fsr_trigger) << " | " << fmt(c.mean_fsr_neg)
               << " | " << fmt(c.mean_ppl) << " |\n";
        }
    }
    return md.str();
}

}  // namespace ctcc
