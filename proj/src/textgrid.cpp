#include "phonodiverge/textgrid.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "phonodiverge/error.hpp"

namespace phonodiverge::textgrid {
namespace {

void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string ascii_upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

enum class TokenKind { kString, kNumber, kFlag };

struct Token {
  TokenKind kind;
  std::string text;
  double number = 0.0;
  int line = 0;
};

// Praat's text serialization is a stream of quoted strings, numbers and
// <flags>; the long format only adds "key =" labels and [index] markers.
std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  int line = 1;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '"') {
      Token tok{TokenKind::kString, {}, 0.0, line};
      ++i;
      bool closed = false;
      while (i < n) {
        if (text[i] == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            tok.text.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        if (text[i] == '\n') ++line;
        tok.text.push_back(text[i++]);
      }
      if (!closed) throw ParseError("unterminated string literal", tok.line);
      tokens.push_back(std::move(tok));
    } else if (c == '!') {
      while (i < n && text[i] != '\n') ++i;
    } else if (c == '<') {
      const size_t close = text.find('>', i);
      if (close == std::string_view::npos) throw ParseError("unterminated <flag>", line);
      tokens.push_back({TokenKind::kFlag, std::string(text.substr(i + 1, close - i - 1)), 0.0, line});
      i = close + 1;
    } else if (c == '[') {
      const size_t close = text.find(']', i);
      if (close == std::string_view::npos) throw ParseError("unterminated [index]", line);
      i = close + 1;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '.' ||
                       text[j] == '-' || text[j] == '+')) {
        ++j;
      }
      std::string_view word = text.substr(i, j - i);
      if (!word.empty() && word.front() == '+') word.remove_prefix(1);
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), value);
      if (ec != std::errc() || ptr != word.data() + word.size()) {
        throw ParseError("malformed number '" + std::string(text.substr(i, j - i)) + "'", line);
      }
      tokens.push_back({TokenKind::kNumber, std::string(word), value, line});
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      // Field names of the long format.
      while (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_' ||
                       text[i] == '?')) {
        ++i;
      }
    } else {
      ++i;
    }
  }
  return tokens;
}

class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  bool done() const { return pos_ >= tokens_.size(); }
  int line() const {
    if (tokens_.empty()) return 1;
    return done() ? tokens_.back().line : tokens_[pos_].line;
  }
  const Token& peek() const { return tokens_[pos_]; }

  const Token& expect(TokenKind kind, const char* what) {
    if (done()) throw ParseError(std::string("unexpected end of file, expected ") + what, line());
    const Token& tok = tokens_[pos_];
    if (tok.kind != kind) throw ParseError(std::string("expected ") + what, tok.line);
    ++pos_;
    return tok;
  }

  std::string string(const char* what) { return expect(TokenKind::kString, what).text; }
  double number(const char* what) { return expect(TokenKind::kNumber, what).number; }

  size_t count(const char* what) {
    const Token& tok = expect(TokenKind::kNumber, what);
    if (tok.number < 0 || tok.number != static_cast<double>(static_cast<size_t>(tok.number))) {
      throw ParseError(std::string(what) + " must be a non-negative integer", tok.line);
    }
    return static_cast<size_t>(tok.number);
  }

 private:
  std::vector<Token> tokens_;
  size_t pos_ = 0;
};

}  // namespace

SilenceSet default_silence_labels() { return {"", "SIL", "SP", "SPN"}; }

std::string decode_text(std::string_view bytes) {
  auto byte = [&](size_t k) { return static_cast<unsigned char>(bytes[k]); };
  if (bytes.size() >= 3 && byte(0) == 0xEF && byte(1) == 0xBB && byte(2) == 0xBF) {
    return std::string(bytes.substr(3));
  }
  const bool le = bytes.size() >= 2 && byte(0) == 0xFF && byte(1) == 0xFE;
  const bool be = bytes.size() >= 2 && byte(0) == 0xFE && byte(1) == 0xFF;
  if (!le && !be) return std::string(bytes);
  if (bytes.size() % 2 != 0) throw ParseError("odd byte count in UTF-16 input", 1);

  std::string out;
  out.reserve(bytes.size() / 2);
  int line = 1;
  auto unit = [&](size_t k) -> uint32_t {
    return le ? (byte(k) | (byte(k + 1) << 8)) : ((byte(k) << 8) | byte(k + 1));
  };
  for (size_t k = 2; k < bytes.size(); k += 2) {
    uint32_t cp = unit(k);
    if (cp >= 0xD800 && cp <= 0xDBFF) {
      if (k + 2 >= bytes.size()) throw ParseError("truncated UTF-16 surrogate pair", line);
      const uint32_t low = unit(k + 2);
      if (low < 0xDC00 || low > 0xDFFF) throw ParseError("invalid UTF-16 surrogate pair", line);
      cp = 0x10000 + ((cp - 0xD800) << 10) + (low - 0xDC00);
      k += 2;
    } else if (cp >= 0xDC00 && cp <= 0xDFFF) {
      throw ParseError("unpaired UTF-16 low surrogate", line);
    }
    if (cp == '\n') ++line;
    append_utf8(out, cp);
  }
  return out;
}

std::vector<Tier> parse_textgrid(std::string_view bytes) {
  const std::string text = decode_text(bytes);
  if (text.find("ooBinaryFile") != std::string::npos) {
    throw ParseError("binary TextGrid files are not supported", 1);
  }

  TokenStream ts(tokenize(text));
  if (ts.string("file type") != "ooTextFile") throw ParseError("not a Praat text file", 1);
  if (ts.string("object class") != "TextGrid") {
    throw ParseError("object class is not TextGrid", ts.line());
  }
  ts.number("grid xmin");
  ts.number("grid xmax");

  std::vector<Tier> tiers;
  const Token& flag = ts.expect(TokenKind::kFlag, "<exists> or <absent>");
  if (flag.text == "absent") {
    if (!ts.done()) throw ParseError("content after <absent> tier flag", ts.line());
    return tiers;
  }
  if (flag.text != "exists") throw ParseError("unknown flag <" + flag.text + ">", flag.line);

  const size_t n_tiers = ts.count("tier count");
  for (size_t t = 0; t < n_tiers; ++t) {
    const int class_line = ts.line();
    const std::string tier_class = ts.string("tier class");
    Tier tier;
    tier.name = ts.string("tier name");
    tier.tmin = ts.number("tier xmin");
    tier.tmax = ts.number("tier xmax");
    if (tier.tmax < tier.tmin) throw ParseError("tier xmax < xmin", ts.line());
    const size_t n_items = ts.count("interval count");

    if (tier_class == "TextTier") {
      for (size_t k = 0; k < n_items; ++k) {
        ts.number("point time");
        ts.string("point mark");
      }
      continue;
    }
    if (tier_class != "IntervalTier") {
      throw ParseError("unknown tier class '" + tier_class + "'", class_line);
    }

    tier.intervals.reserve(n_items);
    for (size_t k = 0; k < n_items; ++k) {
      const int line = ts.line();
      Interval iv;
      iv.xmin = ts.number("interval xmin (interval count mismatch?)");
      iv.xmax = ts.number("interval xmax");
      iv.label = ts.string("interval text");
      if (!(iv.xmin < iv.xmax)) {
        throw ParseError("non-monotone boundaries: interval xmin >= xmax", line);
      }
      if (!tier.intervals.empty() &&
          tier.intervals.back().xmax > iv.xmin + kBoundaryTolerance) {
        throw ParseError("non-monotone boundaries: interval overlaps its predecessor", line);
      }
      if (iv.xmin < tier.tmin - kBoundaryTolerance || iv.xmax > tier.tmax + kBoundaryTolerance) {
        throw ParseError("interval outside tier bounds", line);
      }
      tier.intervals.push_back(std::move(iv));
    }
    tiers.push_back(std::move(tier));
  }
  if (!ts.done()) {
    throw ParseError("unexpected content after last tier (interval count mismatch?)", ts.line());
  }
  return tiers;
}

std::vector<Tier> read_textgrid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open TextGrid '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_textgrid(buf.str());
  } catch (const ParseError& e) {
    throw e.in(path);
  }
}

PhonemeLabel normalize_label(std::string_view raw, const SilenceSet& silence) {
  std::string_view s = trim(raw);
  while (!s.empty() && (std::isdigit(static_cast<unsigned char>(s.back())) ||
                        std::isspace(static_cast<unsigned char>(s.back())))) {
    s.remove_suffix(1);
  }
  std::string upper = ascii_upper(s);
  for (const auto& sil : silence) {
    if (ascii_upper(sil) == upper) return PhonemeLabel{};
  }
  return PhonemeLabel{std::move(upper)};
}

std::vector<std::pair<PhonemeLabel, Interval>> phone_intervals(const std::vector<Tier>& tiers,
                                                               std::string_view tier_name,
                                                               const SilenceSet& silence) {
  auto it = std::find_if(tiers.begin(), tiers.end(),
                         [&](const Tier& t) { return t.name == tier_name; });
  if (it == tiers.end()) {
    std::string available;
    for (const auto& t : tiers) available += (available.empty() ? "" : ", ") + ("'" + t.name + "'");
    throw ValidationError("no tier named '" + std::string(tier_name) +
                          "'; available tiers: " + (available.empty() ? "(none)" : available));
  }
  std::vector<std::pair<PhonemeLabel, Interval>> out;
  for (const auto& iv : it->intervals) {
    PhonemeLabel label = normalize_label(iv.label, silence);
    if (!label.is_silence()) out.emplace_back(std::move(label), iv);
  }
  return out;
}

}  // namespace phonodiverge::textgrid
