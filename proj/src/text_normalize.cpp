#include "coannot/text_normalize.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "coannot/error.hpp"

namespace coannot {

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::Casefold: return "casefold";
    case Normalization::CasefoldStripDiacritics: return "casefold+diacritic-strip";
  }
  return "none";
}

Normalization parse_normalization(std::string_view text) {
  if (text == "none") return Normalization::None;
  if (text == "casefold") return Normalization::Casefold;
  if (text == "casefold+diacritic-strip" || text == "casefold-strip") {
    return Normalization::CasefoldStripDiacritics;
  }
  throw Error(ErrorCode::Configuration, "unknown normalization: " + std::string(text));
}

TextNormalizer::TextNormalizer(Normalization mode, std::map<char32_t, char32_t> folding)
    : mode_(mode), folding_(std::move(folding)) {}

std::string TextNormalizer::operator()(std::string_view utf8) const {
  if (mode_ == Normalization::None && folding_.empty()) return std::string(utf8);

  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  if (mode_ != Normalization::None) text.foldCase(U_FOLD_CASE_DEFAULT);

  if (mode_ == Normalization::CasefoldStripDiacritics) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfd = icu::Normalizer2::getNFDInstance(status);
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error(ErrorCode::Configuration, "ICU normalizer unavailable");
    const icu::UnicodeString decomposed = nfd->normalize(text, status);
    icu::UnicodeString stripped;
    for (int32_t i = 0; i < decomposed.length();) {
      const UChar32 c = decomposed.char32At(i);
      if (u_charType(c) != U_NON_SPACING_MARK) stripped.append(c);
      i += U16_LENGTH(c);
    }
    text = nfc->normalize(stripped, status);
    if (U_FAILURE(status)) throw Error(ErrorCode::Validation, "normalization failed");
  }

  if (!folding_.empty()) {
    icu::UnicodeString folded;
    for (int32_t i = 0; i < text.length();) {
      const UChar32 c = text.char32At(i);
      auto it = folding_.find(static_cast<char32_t>(c));
      folded.append(it == folding_.end() ? c : static_cast<UChar32>(it->second));
      i += U16_LENGTH(c);
    }
    text = folded;
  }

  std::string out;
  text.toUTF8String(out);
  return out;
}

std::map<char32_t, char32_t> arabic_letter_folding() {
  return {
      {U'آ', U'ا'},  // alef with madda
      {U'أ', U'ا'},  // alef with hamza above
      {U'إ', U'ا'},  // alef with hamza below
      {U'ٱ', U'ا'},  // alef wasla
      {U'ى', U'ي'},  // alef maqsura -> ya
      {U'ة', U'ه'},  // ta marbuta -> ha
  };
}

}  // namespace coannot
