#include "fscil/analysis/alignment.hpp"

#include <stdexcept>
#include <string>

namespace fscil::analysis {

AlignmentScores planted_redundancy_alignment(std::span<const PatchMask> alr,
                                             std::span<const data::RegionAnnotation* const> regions,
                                             int stride) {
  if (alr.size() != regions.size()) throw std::invalid_argument("alignment: masks and regions differ in length");
  if (alr.empty()) throw std::invalid_argument("alignment: no samples");
  if (stride < 1) throw std::invalid_argument("alignment: stride must be >= 1");
  AlignmentScores out;
  double alr_sig = 0, alr_nui = 0, ali_sig = 0, ali_nui = 0;
  double sig_rate = 0, nui_rate = 0;
  const double window = static_cast<double>(stride) * stride;
  for (std::size_t s = 0; s < alr.size(); ++s) {
    const data::RegionAnnotation* r = regions[s];
    if (!r) throw std::invalid_argument("alignment: sample " + std::to_string(s) + " has no region annotation");
    const PatchMask& mask = alr[s];
    const double image_area = window * mask.height() * mask.width();
    sig_rate += r->signal.area() / image_area;
    if (r->nuisance) nui_rate += r->nuisance->area() / image_area;
    for (int a = 0; a < mask.height(); ++a) {
      for (int b = 0; b < mask.width(); ++b) {
        const data::Box cell{b * stride, a * stride, (b + 1) * stride, (a + 1) * stride};
        const double sig = cell.intersection_area(r->signal) / window;
        const double nui = r->nuisance ? cell.intersection_area(*r->nuisance) / window : 0.0;
        if (mask(a, b)) {
          out.alr_mass += 1.0;
          alr_sig += sig;
          alr_nui += nui;
        } else {
          out.ali_mass += 1.0;
          ali_sig += sig;
          ali_nui += nui;
        }
      }
    }
  }
  const auto ratio = [](double x, double mass) { return mass > 0.0 ? x / mass : 0.0; };
  out.samples = alr.size();
  out.alr_in_signal = ratio(alr_sig, out.alr_mass);
  out.alr_in_nuisance = ratio(alr_nui, out.alr_mass);
  out.ali_in_signal = ratio(ali_sig, out.ali_mass);
  out.ali_in_nuisance = ratio(ali_nui, out.ali_mass);
  out.signal_base_rate = sig_rate / static_cast<double>(alr.size());
  out.nuisance_base_rate = nui_rate / static_cast<double>(alr.size());
  return out;
}

}  // namespace fscil::analysis
