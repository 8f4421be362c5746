#include "fscil/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "fscil/core/random.hpp"

namespace fscil::data {

std::string to_string(NuisanceSharing sharing) {
  return sharing == NuisanceSharing::kSharedAcrossClasses ? "SHARED_ACROSS_CLASSES"
                                                          : "PER_CLASS_SUBSET";
}

NuisanceSharing nuisance_sharing_from_string(const std::string& text) {
  if (text == "SHARED_ACROSS_CLASSES") return NuisanceSharing::kSharedAcrossClasses;
  if (text == "PER_CLASS_SUBSET") return NuisanceSharing::kPerClassSubset;
  throw std::invalid_argument("unknown nuisance_sharing '" + text + "'");
}

void SyntheticSpec::validate() const {
  auto require = [](bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(std::string("SyntheticSpec: ") + message);
  };
  require(image_size >= 2, "image_size must be >= 2");
  require(class_count >= 1, "class_count must be >= 1");
  require(samples_per_class >= 1, "samples_per_class must be >= 1");
  require(test_samples_per_class >= 0, "test_samples_per_class must be >= 0");
  require(signal_patch_size >= 1 && signal_patch_size <= image_size,
          "signal_patch_size must fit within the image");
  require(nuisance_patch_size >= 0 && nuisance_patch_size <= image_size,
          "nuisance_patch_size must fit within the image");
  // Two squares fit side by side without overlap iff their sides sum to at
  // most the image side.
  require(signal_patch_size + nuisance_patch_size <= image_size,
          "signal and nuisance patch regions overlap: sizes exceed image_size");
  require(noise_sigma >= 0.0, "noise_sigma must be nonnegative");
  require(placement_grid >= 1, "placement_grid must be >= 1");
  require(signal_contrast >= 0.0 && nuisance_contrast >= 0.0, "contrasts must be nonnegative");
}

namespace {

constexpr int kOrientations = 8;
constexpr double kPeriods[] = {3.0, 4.5, 7.0};
constexpr int kPeriodCount = static_cast<int>(std::size(kPeriods));

// Seeded assignment of (orientation, period) grid cells to classes; cells are
// reused only after all have been handed out.
std::vector<int> texture_cells(const SyntheticSpec& spec) {
  std::vector<int> cells(kOrientations * kPeriodCount);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
  Rng rng(derive_seed(spec.seed, "synthetic/textures"));
  std::shuffle(cells.begin(), cells.end(), rng);
  return cells;
}

double signal_value(const SignalTexture& tex, int dx, int dy) {
  const double u = dx * std::cos(tex.orientation) + dy * std::sin(tex.orientation);
  return std::sin(2.0 * std::numbers::pi * u / tex.period);
}

double nuisance_value(int texture, int dx, int dy) {
  if (texture == 0) return ((dx / 2 + dy / 2) % 2 == 0) ? 1.0 : -1.0;  // 2px checkerboard
  return (dx % 4 < 2 && dy % 4 < 2) ? 1.0 : -1.0;                        // dot lattice
}

std::vector<std::pair<int, int>> candidate_corners(int image, int size, int grid,
                                                   const Box* avoid) {
  std::vector<std::pair<int, int>> out;
  auto collect = [&](int step) {
    for (int y = 0; y + size <= image; y += step) {
      for (int x = 0; x + size <= image; x += step) {
        Box b{x, y, x + size, y + size};
        if (!avoid || !b.overlaps(*avoid)) out.emplace_back(x, y);
      }
    }
  };
  collect(grid);
  if (out.empty()) collect(1);
  return out;
}

}  // namespace

SignalTexture signal_texture_for(const SyntheticSpec& spec, int class_id) {
  const auto cells = texture_cells(spec);
  const int cell = cells[static_cast<std::size_t>(class_id) % cells.size()];
  return {std::numbers::pi * (cell % kOrientations) / kOrientations,
          kPeriods[cell / kOrientations]};
}

int nuisance_texture_for(const SyntheticSpec& spec, int class_id) {
  if (spec.nuisance_patch_size == 0) return -1;
  if (spec.nuisance_sharing == NuisanceSharing::kSharedAcrossClasses) {
    return class_id % 2 == 0 ? 0 : -1;
  }
  return class_id % 2;
}

std::unique_ptr<InMemoryDataset> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<std::string> names;
  for (int c = 0; c < spec.class_count; ++c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%03d", c);
    names.emplace_back(buf);
  }
  auto dataset = std::make_unique<InMemoryDataset>("synthetic", names);

  std::vector<SignalTexture> textures;
  for (int c = 0; c < spec.class_count; ++c) textures.push_back(signal_texture_for(spec, c));

  Rng rng(derive_seed(spec.seed, "synthetic/samples"));
  std::normal_distribution<double> noise(0.0, 1.0);
  const int S = spec.image_size;

  // Signal corners that still leave room for a disjoint nuisance patch.
  std::vector<std::pair<int, int>> signal_corners;
  for (const auto& [x, y] : candidate_corners(S, spec.signal_patch_size, spec.placement_grid, nullptr)) {
    const Box b{x, y, x + spec.signal_patch_size, y + spec.signal_patch_size};
    if (spec.nuisance_patch_size == 0 ||
        !candidate_corners(S, spec.nuisance_patch_size, 1, &b).empty()) {
      signal_corners.emplace_back(x, y);
    }
  }
  if (signal_corners.empty()) {
    throw std::invalid_argument("SyntheticSpec: no signal placement leaves room for the nuisance patch");
  }

  auto make_sample = [&](int cls) {
    const auto [sx, sy] = signal_corners[std::uniform_int_distribution<std::size_t>(
        0, signal_corners.size() - 1)(rng)];
    RegionAnnotation regions;
    regions.signal = {sx, sy, sx + spec.signal_patch_size, sy + spec.signal_patch_size};

    const int nuisance = nuisance_texture_for(spec, cls);
    if (nuisance >= 0) {
      const auto corners =
          candidate_corners(S, spec.nuisance_patch_size, spec.placement_grid, &regions.signal);
      const auto [nx, ny] =
          corners[std::uniform_int_distribution<std::size_t>(0, corners.size() - 1)(rng)];
      regions.nuisance = Box{nx, ny, nx + spec.nuisance_patch_size, ny + spec.nuisance_patch_size};
    }

    Image img = make_image(S, S, 1);
    for (int y = 0; y < S; ++y) {
      for (int x = 0; x < S; ++x) {
        double v = 0.5;
        if (x >= regions.signal.x0 && x < regions.signal.x1 && y >= regions.signal.y0 &&
            y < regions.signal.y1) {
          v += spec.signal_contrast *
               signal_value(textures[static_cast<std::size_t>(cls)], x - regions.signal.x0,
                            y - regions.signal.y0);
        } else if (regions.nuisance && x >= regions.nuisance->x0 && x < regions.nuisance->x1 &&
                   y >= regions.nuisance->y0 && y < regions.nuisance->y1) {
          v += spec.nuisance_contrast *
               nuisance_value(nuisance, x - regions.nuisance->x0, y - regions.nuisance->y0);
        }
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(rng);
        img.at(y, x, 0) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
    return std::pair{std::move(img), regions};
  };

  for (Partition p : {Partition::kTrain, Partition::kTest}) {
    const int per_class = p == Partition::kTrain ? spec.samples_per_class : spec.test_samples_per_class;
    int serial = 0;
    for (int c = 0; c < spec.class_count; ++c) {
      for (int i = 0; i < per_class; ++i) {
        auto [img, regions] = make_sample(c);
        char id[32];
        std::snprintf(id, sizeof id, "%s_%06d", to_string(p).c_str(), serial++);
        dataset->add(p, {id, c}, std::move(img), regions);
      }
    }
  }
  return dataset;
}

}  // namespace fscil::data
