#pragma once

#include <algorithm>
#include <array>
#include <string_view>

namespace phonodiverge {

inline constexpr std::array<std::string_view, 15> kVowels = {
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW"};

inline constexpr std::array<std::string_view, 23> kConsonants = {
    "B", "CH", "D", "DH", "F", "G", "HH", "JH", "K", "L", "M", "N",
    "NG", "P", "R", "S", "SH", "T", "TH", "V", "W", "Y", "Z"};

inline bool is_vowel(std::string_view phoneme) {
  return std::find(kVowels.begin(), kVowels.end(), phoneme) != kVowels.end();
}

}  // namespace phonodiverge
