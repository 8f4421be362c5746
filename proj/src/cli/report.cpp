#include "fscil/cli/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fscil/analysis/plots.hpp"
#include "fscil/cli/experiment.hpp"

namespace fs = std::filesystem;

namespace fscil::cli {

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string pct(const std::optional<double>& v) { return v ? pct(*v) : "n/a"; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::optional<nlohmann::json> read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error&) {
    return std::nullopt;
  }
}

std::optional<analysis::Cdf> read_cdf(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  analysis::Cdf cdf;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    cdf.values.push_back(std::stod(line.substr(0, comma)));
    cdf.cumulative.push_back(std::stod(line.substr(comma + 1)));
  }
  return cdf;
}

struct RunView {
  fs::path dir;
  std::string name;
  std::optional<nlohmann::json> config;
  std::optional<std::vector<MetricsRow>> metrics;
  std::optional<nlohmann::json> analysis;
  bool analysis_enabled = true;
  bool schedule_only = false;
};

RunView load_run(const fs::path& dir, std::vector<std::string>& gaps) {
  RunView v;
  v.dir = dir;
  v.name = dir.filename().string();
  v.config = read_json(RunPaths{dir}.config());
  if (!v.config) {
    gaps.push_back(v.name + ": config.json missing");
  } else {
    v.name = v.config->value("name", v.name);
    v.analysis_enabled = (*v.config)["analysis"].value("enabled", true);
    v.schedule_only = (*v.config)["data"].value("schedule_only", false);
  }
  if (v.schedule_only) return v;
  try {
    v.metrics = read_metrics_csv(RunPaths{dir}.metrics());
  } catch (const std::exception&) {
    gaps.push_back(v.name + ": metrics.csv missing or unreadable (run incomplete)");
  }
  if (v.analysis_enabled) {
    v.analysis = read_json(RunPaths{dir}.reports() / "analysis.json");
    if (!v.analysis) gaps.push_back(v.name + ": reports/analysis.json missing");
  }
  return v;
}

void session_table(std::ostream& md, const std::vector<const RunView*>& runs) {
  std::size_t sessions = 0;
  for (const auto* r : runs) {
    if (r->metrics) sessions = std::max(sessions, r->metrics->size());
  }
  md << "| Method |";
  for (std::size_t t = 0; t < sessions; ++t) md << ' ' << t << " |";
  md << " Average Acc. |\n|---|";
  for (std::size_t t = 0; t <= sessions; ++t) md << "---|";
  md << '\n';
  for (const auto* r : runs) {
    if (!r->metrics) continue;
    md << "| " << r->name << " |";
    double sum = 0.0;
    for (std::size_t t = 0; t < sessions; ++t) {
      if (t < r->metrics->size()) {
        md << ' ' << pct((*r->metrics)[t].top1) << " |";
        sum += (*r->metrics)[t].top1;
      } else {
        md << " missing |";
      }
    }
    md << ' ' << pct(sum / static_cast<double>(r->metrics->size())) << " |\n";
  }
}

void write_png_checked(const fs::path& path, const data::Image& img, RenderedReport& out) {
  data::write_png(path, img);
  out.images.push_back(path);
}

}  // namespace

RenderedReport render_report(const fs::path& run_dir, const std::optional<fs::path>& compare_dir) {
  RenderedReport out;
  if (!fs::is_directory(run_dir)) throw std::runtime_error("no run directory at " + run_dir.string());
  const fs::path report_dir = run_dir / "report";
  fs::create_directories(report_dir);

  const RunView run = load_run(run_dir, out.gaps);
  std::optional<RunView> other;
  if (compare_dir) other = load_run(*compare_dir, out.gaps);

  std::ostringstream md;
  md << "# Run summary: " << run.name << "\n\n";

  if (run.schedule_only) {
    md << "Schedule-only run, no training.\n\n";
    std::ifstream csv(RunPaths{run_dir}.reports() / "schedule.csv");
    if (!csv) {
      out.gaps.push_back(run.name + ": reports/schedule.csv missing");
    } else {
      md << "| Session | Way | Shot | Classes seen | Train samples | Test samples |\n|---|---|---|---|---|---|\n";
      std::string line;
      std::getline(csv, line);
      while (std::getline(csv, line)) {
        std::string cell;
        std::stringstream ss(line);
        md << '|';
        while (std::getline(ss, cell, ',')) md << ' ' << cell << " |";
        md << '\n';
      }
      md << '\n';
    }
  }

  if (run.metrics) {
    md << "## Top-1 accuracy per session (%)\n\n";
    std::vector<const RunView*> rows{&run};
    if (other && other->metrics) rows.push_back(&*other);
    session_table(md, rows);

    md << "\n## Base-novel confusion (%)\n\n";
    md << "| Session | BA | NA | AA | NN | Gap (NN - NA) |\n|---|---|---|---|---|---|\n";
    for (const auto& r : *run.metrics) {
      md << "| " << r.session << " | " << pct(r.ba) << " | " << pct(r.na) << " | " << pct(r.aa)
         << " | " << pct(r.nn) << " | " << pct(r.gap) << " |\n";
    }
    std::vector<analysis::BarSeries> bars(2);
    bars[0].color = analysis::palette(0);
    bars[1].color = analysis::palette(1);
    for (const auto& r : *run.metrics) {
      if (!r.na) continue;
      bars[0].values.push_back(*r.na);
      bars[1].values.push_back(*r.nn);
    }
    if (!bars[0].values.empty()) {
      write_png_checked(report_dir / "confusion.png", analysis::bar_plot(bars), out);
      md << "\n![confusion](confusion.png)\n\nBars per incremental session: NA (blue) and NN (red). "
            "The height difference is the confusion gap.\n";
    }
  }

  if (run.analysis_enabled && run.analysis) {
    const auto& a = *run.analysis;
    md << "\n## Diagnostics\n\n";
    if (a.contains("distances")) {
      md << "### Base-class cosine distances\n\n"
         << "- intra-class mean: " << num(a["distances"]["intra_mean"].get<double>()) << '\n'
         << "- inter-class mean: " << num(a["distances"]["inter_mean"].get<double>()) << '\n';
      for (const auto& w : a["distances"]["warnings"]) md << "- warning: " << w.get<std::string>() << '\n';
      std::vector<analysis::LineSeries> lines;
      std::size_t colour = 0;
      for (const RunView* r : std::vector<const RunView*>{&run, other ? &*other : nullptr}) {
        if (!r) continue;
        for (const char* which : {"cdf_intra.csv", "cdf_inter.csv"}) {
          const auto cdf = read_cdf(RunPaths{r->dir}.reports() / which);
          if (!cdf) {
            out.gaps.push_back(r->name + ": reports/" + which + " missing");
            ++colour;
            continue;
          }
          lines.push_back({cdf->values, cdf->cumulative, analysis::palette(colour++)});
        }
      }
      if (!lines.empty()) {
        write_png_checked(report_dir / "cdf.png", analysis::line_plot(lines), out);
        md << "\n![cdf](cdf.png)\n\nCumulative frequency against cosine distance: intra (blue) and "
              "inter (red) for this run";
        if (other) md << ", intra (green) and inter (orange) for " << other->name;
        md << ".\n";
      }
    }
    if (a.contains("patch_similarity")) {
      const auto& p = a["patch_similarity"];
      md << "\n### Patch similarity (threshold " << num(p["threshold"].get<double>()) << ")\n\n"
         << "| Category | Patches | exp(tau cos) to own class | sum exp(tau cos) to other classes |\n"
            "|---|---|---|---|\n";
      for (const char* cat : {"central", "redundant"}) {
        const auto& c = p[cat];
        md << "| " << cat << " | " << c["count"].get<long>() << " | "
           << (c["own"].is_null() ? std::string("absent") : num(c["own"].get<double>())) << " | "
           << (c["others"].is_null() ? std::string("absent") : num(c["others"].get<double>())) << " |\n";
      }
    }
    if (a.contains("alignment") && !a["alignment"].is_null()) {
      const auto& g = a["alignment"];
      md << "\n### Planted-redundancy alignment\n\n"
         << "| Quantity | Value | Base rate |\n|---|---|---|\n"
         << "| ALI mass inside nuisance boxes | " << num(g["ali_in_nuisance"].get<double>()) << " | "
         << num(g["nuisance_base_rate"].get<double>()) << " |\n"
         << "| ALR mass inside signal boxes | " << num(g["alr_in_signal"].get<double>()) << " | "
         << num(g["signal_base_rate"].get<double>()) << " |\n";
    }
  }

  if (other) {
    md << "\n## Comparison: " << run.name << " vs " << other->name << "\n\n";
    if (run.metrics && other->metrics) {
      md << "| Session | Gap " << run.name << " | Gap " << other->name << " |\n|---|---|---|\n";
      std::vector<analysis::BarSeries> bars{{{}, analysis::palette(0)}, {{}, analysis::palette(1)}};
      const std::size_t n = std::min(run.metrics->size(), other->metrics->size());
      for (std::size_t t = 0; t < n; ++t) {
        const auto& a = (*run.metrics)[t];
        const auto& b = (*other->metrics)[t];
        if (!a.gap || !b.gap) continue;
        md << "| " << t << " | " << pct(a.gap) << " | " << pct(b.gap) << " |\n";
        bars[0].values.push_back(*a.gap);
        bars[1].values.push_back(*b.gap);
      }
      if (!bars[0].values.empty()) {
        write_png_checked(report_dir / "gap_compare.png", analysis::bar_plot(bars), out);
        md << "\n![gap comparison](gap_compare.png)\n\nConfusion gap per session: " << run.name
           << " (blue), " << other->name << " (red).\n";
      }
    }
  }

  if (!out.gaps.empty()) {
    md << "\n## Missing artifacts\n\n";
    for (const auto& g : out.gaps) md << "- " << g << '\n';
  }

  out.markdown = report_dir / "report.md";
  std::ofstream file(out.markdown);
  if (!file) throw std::runtime_error("cannot write " + out.markdown.string());
  file << md.str();
  return out;
}

}  // namespace fscil::cli
