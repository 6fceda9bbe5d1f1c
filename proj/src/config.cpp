#include "cornerforge/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cornerforge/rng.hpp"

namespace cornerforge {

namespace fs = std::filesystem;

namespace {

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  TomlDocument parse() {
    TomlDocument doc;
    doc[""];
    std::string section;
    while (pos_ < text_.size()) {
      skip_blank();
      if (pos_ >= text_.size()) break;
      const char c = text_[pos_];
      if (c == '\n') {
        advance();
        continue;
      }
      if (c == '#') {
        skip_comment();
        continue;
      }
      if (c == '[') {
        advance();
        skip_blank();
        section = parse_key();
        skip_blank();
        expect(']');
        doc[section];
        end_of_line();
        continue;
      }
      const std::size_t key_line = line_;
      std::string key = parse_key();
      skip_blank();
      expect('=');
      skip_blank();
      TomlValue value = parse_value();
      value.line = key_line;
      if (!doc[section].emplace(key, std::move(value)).second) fail("duplicate key '" + key + "'");
      end_of_line();
    }
    return doc;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_) + ": " + what);
  }

  void advance() {
    if (text_[pos_] == '\n') ++line_;
    ++pos_;
  }

  void skip_blank() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
  }

  void skip_comment() {
    while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }

  // Blank space, newlines and comments, as allowed inside arrays.
  void skip_space() {
    while (pos_ < text_.size()) {
      skip_blank();
      if (pos_ < text_.size() && text_[pos_] == '#') skip_comment();
      if (pos_ < text_.size() && text_[pos_] == '\n') {
        advance();
        continue;
      }
      break;
    }
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  void end_of_line() {
    skip_blank();
    if (pos_ < text_.size() && text_[pos_] == '#') skip_comment();
    if (pos_ < text_.size() && text_[pos_] != '\n') fail("unexpected trailing characters");
  }

  std::string parse_key() {
    if (pos_ < text_.size() && (text_[pos_] == '"' || text_[pos_] == '\'')) return parse_string();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '-' ||
            text_[pos_] == '.')) {
      ++pos_;
    }
    if (start == pos_) fail("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string parse_string() {
    const char quote = text_[pos_];
    advance();
    std::string out;
    while (true) {
      if (pos_ >= text_.size() || text_[pos_] == '\n') fail("unterminated string");
      const char c = text_[pos_];
      advance();
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        if (pos_ >= text_.size()) fail("unterminated escape");
        const char e = text_[pos_];
        advance();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
        continue;
      }
      out += c;
    }
    return out;
  }

  TomlValue parse_value() {
    if (pos_ >= text_.size()) fail("missing value");
    TomlValue v;
    v.line = line_;
    const char c = text_[pos_];
    if (c == '"' || c == '\'') {
      v.type = TomlValue::Type::String;
      v.str = parse_string();
      return v;
    }
    if (c == '[') {
      advance();
      v.type = TomlValue::Type::Array;
      skip_space();
      while (pos_ < text_.size() && text_[pos_] != ']') {
        v.array.push_back(parse_value());
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          advance();
          skip_space();
        } else {
          break;
        }
      }
      skip_space();
      expect(']');
      return v;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' && text_[pos_] != '#' &&
           text_[pos_] != '\n' && text_[pos_] != ' ' && text_[pos_] != '\t' && text_[pos_] != '\r') {
      ++pos_;
    }
    std::string token(text_.substr(start, pos_ - start));
    if (token == "true" || token == "false") {
      v.type = TomlValue::Type::Boolean;
      v.boolean = token == "true";
      return v;
    }
    std::string digits;
    for (char ch : token) {
      if (ch != '_') digits += ch;
    }
    if (digits.empty()) fail("missing value");
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    const char* first = digits.data();
    const char* last = digits.data() + digits.size();
    if (*first == '+') ++first;
    if (is_float) {
      v.type = TomlValue::Type::Float;
      auto [ptr, ec] = std::from_chars(first, last, v.real);
      if (ec != std::errc() || ptr != last) fail("invalid number '" + token + "'");
    } else {
      v.type = TomlValue::Type::Integer;
      auto [ptr, ec] = std::from_chars(first, last, v.integer);
      if (ec != std::errc() || ptr != last) fail("invalid value '" + token + "'");
    }
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

/// Collects field-level problems so one run reports all of them.
class FieldReader {
 public:
  FieldReader(const TomlDocument& doc, fs::path base) : doc_(doc), base_(std::move(base)) {}

  const TomlValue* find(const std::string& section, const std::string& key) const {
    auto s = doc_.find(section);
    if (s == doc_.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  static std::string name(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  void error(const std::string& field, const std::string& why) { errors_.push_back(field + ": " + why); }

  template <typename T>
  std::optional<T> integer(const std::string& section, const std::string& key, bool required, std::int64_t min_value) {
    const auto* v = find(section, key);
    if (!v) {
      if (required) error(name(section, key), "missing");
      return std::nullopt;
    }
    if (v->type != TomlValue::Type::Integer) {
      error(name(section, key), "must be an integer");
      return std::nullopt;
    }
    if (v->integer < min_value) {
      error(name(section, key), "must be >= " + std::to_string(min_value));
      return std::nullopt;
    }
    return static_cast<T>(v->integer);
  }

  std::optional<double> real(const std::string& section, const std::string& key, bool required) {
    const auto* v = find(section, key);
    if (!v) {
      if (required) error(name(section, key), "missing");
      return std::nullopt;
    }
    if (v->type == TomlValue::Type::Integer) return static_cast<double>(v->integer);
    if (v->type != TomlValue::Type::Float) {
      error(name(section, key), "must be a number");
      return std::nullopt;
    }
    return v->real;
  }

  std::optional<std::string> string(const std::string& section, const std::string& key, bool required) {
    const auto* v = find(section, key);
    if (!v) {
      if (required) error(name(section, key), "missing");
      return std::nullopt;
    }
    if (v->type != TomlValue::Type::String) {
      error(name(section, key), "must be a string");
      return std::nullopt;
    }
    return v->str;
  }

  std::optional<bool> boolean(const std::string& section, const std::string& key, bool required) {
    const auto* v = find(section, key);
    if (!v) {
      if (required) error(name(section, key), "missing");
      return std::nullopt;
    }
    if (v->type != TomlValue::Type::Boolean) {
      error(name(section, key), "must be true or false");
      return std::nullopt;
    }
    return v->boolean;
  }

  /// Resolves against the config directory; checks existence when asked.
  fs::path path(const std::string& section, const std::string& key, bool must_exist, bool directory) {
    const auto s = string(section, key, true);
    if (!s) return {};
    fs::path p = *s;
    if (p.is_relative()) p = base_ / p;
    p = p.lexically_normal();
    if (must_exist) {
      if (!fs::exists(p)) {
        error(name(section, key), "path '" + p.string() + "' does not exist");
      } else if (directory && !fs::is_directory(p)) {
        error(name(section, key), "path '" + p.string() + "' is not a directory");
      }
    }
    return p;
  }

  const std::vector<std::string>& errors() const { return errors_; }

 private:
  const TomlDocument& doc_;
  fs::path base_;
  std::vector<std::string> errors_;
};

std::optional<Rgb> parse_hex_color(const std::string& s) {
  if (s.size() != 7 || s[0] != '#') return std::nullopt;
  unsigned v = 0;
  auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + 7, v, 16);
  if (ec != std::errc() || ptr != s.data() + 7) return std::nullopt;
  return Rgb{static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

}  // namespace

TomlDocument parse_toml(std::string_view text) { return TomlParser(text).parse(); }

PlanConfig RunConfig::plan_config() const {
  PlanConfig cfg;
  cfg.palette = palette;
  cfg.placement = placement;
  cfg.backend = backend;
  cfg.merge_mode = merge_mode;
  cfg.splits = default_splits(train_size, val_size, test_size);
  cfg.class_quota = class_quota;
  return cfg;
}

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir) {
  TomlDocument doc;
  try {
    doc = parse_toml(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  FieldReader r(doc, base_dir);
  RunConfig cfg;

  if (auto v = r.integer<int>("", "schema_version", true, 1)) {
    if (*v != kConfigSchemaVersion) r.error("schema_version", "unsupported version " + std::to_string(*v));
    cfg.schema_version = *v;
  }
  if (auto v = r.integer<std::uint64_t>("", "master_seed", true, 0)) cfg.master_seed = *v;
  cfg.rng_algorithm = r.string("", "rng_algorithm", false).value_or(std::string(kRngAlgorithm));
  if (cfg.rng_algorithm != kRngAlgorithm) {
    r.error("rng_algorithm", "only '" + std::string(kRngAlgorithm) + "' is implemented");
  }
  cfg.background_dir = r.path("", "background_dir", true, true);
  cfg.output_dir = r.path("", "output_dir", false, false);
  cfg.background_attestation = r.boolean("", "background_attestation", false).value_or(false);

  cfg.train_size = r.integer<std::size_t>("splits", "train", true, 0).value_or(0);
  cfg.val_size = r.integer<std::size_t>("splits", "val", true, 0).value_or(0);
  cfg.test_size = r.integer<std::size_t>("splits", "test", true, 0).value_or(0);

  cfg.train_pool = r.path("pools", "train", true, false);
  cfg.heldout_pool = r.path("pools", "heldout", true, false);

  if (auto v = r.real("placement", "vertical_fraction", false)) cfg.placement.vertical_fraction = *v;
  if (auto v = r.integer<std::uint32_t>("placement", "crop_size", false, 16)) cfg.placement.crop_size = *v;
  if (auto v = r.real("placement", "mask_scale_min", false)) cfg.placement.mask_scale_min = *v;
  if (auto v = r.real("placement", "mask_scale_max", false)) cfg.placement.mask_scale_max = *v;
  if (auto v = r.integer<std::uint32_t>("placement", "edge_margin", false, 0)) cfg.placement.edge_margin = *v;
  try {
    cfg.placement.validate();
  } catch (const Error& e) {
    r.error("placement", e.what());
  }

  const auto mode = r.string("merge", "mode", false).value_or("hard_paste");
  if (mode == "feather") {
    cfg.merge_mode = Feather{r.integer<std::uint32_t>("merge", "border_px", false, 1).value_or(4)};
  } else if (mode != "hard_paste") {
    r.error("merge.mode", "must be 'hard_paste' or 'feather'");
  }

  const auto kind = r.string("backend", "kind", false).value_or("procedural");
  try {
    cfg.backend.kind = backend_kind_from_string(kind);
  } catch (const Error&) {
    r.error("backend.kind", "must be procedural, mask_conditioned or diffusion");
  }
  cfg.backend.endpoint = r.string("backend", "endpoint", false);
  if (auto t = r.real("backend", "timeout_s", false)) {
    if (*t <= 0) r.error("backend.timeout_s", "must be > 0");
    cfg.backend.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(*t * 1000.0));
  }
  if (cfg.backend.kind != BackendKind::Procedural && !cfg.backend.endpoint) {
    r.error("backend.endpoint", "required for remote backend kinds");
  }

  if (const auto* classes = r.find("palette", "classes")) {
    const auto* colors = r.find("palette", "colors");
    if (classes->type != TomlValue::Type::Array) {
      r.error("palette.classes", "must be an array of class names");
    } else {
      std::vector<PaletteEntry> entries;
      const auto defaults = ClassPalette::airborne_default();
      bool ok = true;
      for (std::size_t i = 0; i < classes->array.size(); ++i) {
        const auto& name = classes->array[i];
        if (name.type != TomlValue::Type::String) {
          r.error("palette.classes", "entries must be strings");
          ok = false;
          break;
        }
        Rgb color{};
        if (colors && colors->type == TomlValue::Type::Array && i < colors->array.size() &&
            colors->array[i].type == TomlValue::Type::String) {
          const auto parsed = parse_hex_color(colors->array[i].str);
          if (!parsed) {
            r.error("palette.colors", "entry " + std::to_string(i) + " is not #RRGGBB");
            ok = false;
            break;
          }
          color = *parsed;
        } else if (i < defaults.size()) {
          color = defaults.entries()[i].color;
        } else {
          r.error("palette.colors", "needed for class " + std::to_string(i) + " (no default color)");
          ok = false;
          break;
        }
        entries.push_back({name.str, static_cast<std::uint16_t>(i), color});
      }
      if (ok) {
        try {
          cfg.palette = ClassPalette(std::move(entries));
        } catch (const Error& e) {
          r.error("palette", e.what());
        }
      }
    }
  }

  if (auto it = doc.find("quota"); it != doc.end()) {
    std::map<std::uint16_t, std::size_t> quota;
    for (const auto& [name, value] : it->second) {
      const auto cls = cfg.palette.find(name);
      if (!cls) {
        r.error("quota." + name, "not a palette class");
        continue;
      }
      if (value.type != TomlValue::Type::Integer || value.integer < 0) {
        r.error("quota." + name, "must be a non-negative integer");
        continue;
      }
      quota[*cls] = static_cast<std::size_t>(value.integer);
    }
    cfg.class_quota = std::move(quota);
  }

  if (!r.errors().empty()) {
    std::string message = "invalid configuration";
    for (const auto& e : r.errors()) message += "\n  " + e;
    throw Error(ErrorCode::ConfigInvalid, message);
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

}  // namespace cornerforge
