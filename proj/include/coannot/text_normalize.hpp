#pragma once

#include <map>
#include <string>
#include <string_view>

namespace coannot {

enum class Normalization { None, Casefold, CasefoldStripDiacritics };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view text);

/// UTF-8 text normaliser used by the keyword baseline. Diacritic stripping
/// removes nonspacing combining marks after canonical decomposition. An
/// optional code-point folding table is applied last.
class TextNormalizer {
 public:
  explicit TextNormalizer(Normalization mode,
                          std::map<char32_t, char32_t> folding = {});

  std::string operator()(std::string_view utf8) const;

  Normalization mode() const { return mode_; }

 private:
  Normalization mode_;
  std::map<char32_t, char32_t> folding_;
};

/// Alef variants to bare alef, alef maqsura to ya, ta marbuta to ha.
std::map<char32_t, char32_t> arabic_letter_folding();

}  // namespace coannot
