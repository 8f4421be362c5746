#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fscil::cli {

struct RenderedReport {
  std::filesystem::path markdown;
  std::vector<std::filesystem::path> images;
  // Artifacts that should exist but do not, as listed in the summary.
  std::vector<std::string> gaps;
};

// Writes <run_dir>/report/report.md plus PNG plots. With `compare_dir` the
// summary adds a side-by-side section for the second run.
RenderedReport render_report(const std::filesystem::path& run_dir,
                             const std::optional<std::filesystem::path>& compare_dir = std::nullopt);

}  // namespace fscil::cli
