#include "texturesmith/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "texturesmith/error.hpp"

namespace texturesmith {

bool PipelineConfig::operator==(const PipelineConfig& o) const {
  return content == o.content && styles == o.styles && network == o.network && segmentation == o.segmentation &&
         crf == o.crf && crf_iterations == o.crf_iterations && synth == o.synth && feather == o.feather &&
         out_image == o.out_image && out_masks == o.out_masks && out_trace == o.out_trace;
}

namespace {

const std::set<std::string, std::less<>> kFixedKeys = {
    "content",       "weights",         "test_net.seed", "test_net.depth", "test_net.channels",
    "unary",         "seeds.fg",        "seeds.bg",      "mask",           "crf.w_app",
    "crf.theta_alpha", "crf.theta_beta", "crf.w_smooth", "crf.theta_gamma", "crf.iters",
    "synth.layers",  "synth.weights",   "synth.init",    "synth.step",     "synth.max_iters",
    "synth.tol",     "synth.mean",      "feather.radius", "out.image",     "out.masks",
    "out.trace",
};

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

struct RawValue {
  std::string text;
  std::size_t line = 0;
};

std::optional<std::uint32_t> parse_label(std::string_view s) {
  if (s == "bg") return 0;
  if (s == "fg") return 1;
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

template <typename T>
T parse_number(const std::string& key, const RawValue& raw) {
  std::string_view s = trim(raw.text);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(ConfigErrc::TypeMismatch, key + ": expected a number, got \"" + raw.text + "\"", raw.line);
  }
  return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const RawValue& raw, char sep = ',') {
  std::vector<T> out;
  std::string_view rest = raw.text;
  while (true) {
    const auto pos = rest.find(sep);
    out.push_back(parse_number<T>(key, RawValue{std::string(trim(rest.substr(0, pos))), raw.line}));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return out;
}

std::vector<Pixel> parse_pixels(const std::string& key, const RawValue& raw) {
  std::vector<Pixel> out;
  std::string_view rest = raw.text;
  while (true) {
    const auto pos = rest.find(';');
    const std::string pair(trim(rest.substr(0, pos)));
    const auto values = parse_list<std::size_t>(key, RawValue{pair, raw.line});
    if (values.size() != 2) {
      throw ConfigError(ConfigErrc::TypeMismatch, key + ": expected row,col pairs, got \"" + pair + "\"", raw.line);
    }
    out.push_back({values[0], values[1]});
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return out;
}

InitMode parse_init(const RawValue& raw) {
  const std::string_view v = trim(raw.text);
  if (v == "content") return InitMode::ContentImage;
  if (v == "noise") return InitMode::WhiteNoise;
  throw ConfigError(ConfigErrc::TypeMismatch, "synth.init: expected content or noise, got \"" + raw.text + "\"",
                    raw.line);
}

class Entries {
 public:
  std::map<std::string, RawValue, std::less<>> values;

  const RawValue* find(std::string_view key) const {
    auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  }
  bool has(std::string_view key) const { return values.count(key) != 0; }
  std::string path(std::string_view key) const { return std::string(trim(values.find(key)->second.text)); }
};

void require_non_empty(const std::string& key, const RawValue& raw) {
  if (trim(raw.text).empty()) throw ConfigError(ConfigErrc::TypeMismatch, key + ": empty value", raw.line);
}

}  // namespace

PipelineConfig parse_config(std::string_view text) {
  Entries entries;
  std::vector<std::string> unknown;
  std::size_t first_unknown_line = 0;
  std::size_t line_no = 0;
  std::string_view rest = text;
  while (!rest.empty()) {
    ++line_no;
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);

    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(ConfigErrc::Syntax, "expected `key = value`, got \"" + std::string(line) + "\"", line_no);
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(ConfigErrc::Syntax, "missing key before `=`", line_no);
    if (entries.has(key)) {
      throw ConfigError(ConfigErrc::Conflict, "duplicate key " + key + " (first set on line " +
                                                  std::to_string(entries.find(key)->line) + ")",
                        line_no);
    }
    bool known = kFixedKeys.count(key) != 0;
    for (std::string_view prefix : {std::string_view("style."), std::string_view("style_mask.")}) {
      if (key.starts_with(prefix) && parse_label(std::string_view(key).substr(prefix.size()))) known = true;
    }
    if (!known) {
      unknown.push_back(key);
      if (first_unknown_line == 0) first_unknown_line = line_no;
    }
    entries.values.emplace(key, RawValue{value, line_no});
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError(ConfigErrc::UnknownKey, "unknown keys: " + list, first_unknown_line);
  }

  PipelineConfig cfg;
  if (!entries.has("content")) throw ConfigError(ConfigErrc::MissingKey, "missing required key: content");
  require_non_empty("content", *entries.find("content"));
  cfg.content = entries.path("content");

  // Styles.
  for (const auto& [key, raw] : entries.values) {
    if (key.starts_with("style.")) {
      require_non_empty(key, raw);
      const std::uint32_t label = *parse_label(std::string_view(key).substr(6));
      if (cfg.styles.count(label)) {
        throw ConfigError(ConfigErrc::Conflict, key + " names label " + std::to_string(label) + " a second time",
                          raw.line);
      }
      cfg.styles[label].image = std::string(trim(raw.text));
    }
  }
  for (const auto& [key, raw] : entries.values) {
    if (key.starts_with("style_mask.")) {
      const std::uint32_t label = *parse_label(std::string_view(key).substr(11));
      auto it = cfg.styles.find(label);
      if (it == cfg.styles.end()) {
        throw ConfigError(ConfigErrc::Conflict, key + " has no matching style." + std::to_string(label), raw.line);
      }
      require_non_empty(key, raw);
      if (it->second.mask) {
        throw ConfigError(ConfigErrc::Conflict, key + " names label " + std::to_string(label) + " a second time",
                          raw.line);
      }
      it->second.mask = std::string(trim(raw.text));
    }
  }

  // Network source.
  const bool has_weights = entries.has("weights");
  const bool has_test_net =
      entries.has("test_net.seed") || entries.has("test_net.depth") || entries.has("test_net.channels");
  if (has_weights && has_test_net) {
    throw ConfigError(ConfigErrc::Conflict, "weights and test_net.* are mutually exclusive network sources");
  }
  if (has_weights) {
    require_non_empty("weights", *entries.find("weights"));
    cfg.network = WeightsFile{entries.path("weights")};
  } else if (has_test_net) {
    TestNetSource net;
    if (const auto* r = entries.find("test_net.seed")) net.seed = parse_number<std::uint64_t>("test_net.seed", *r);
    if (const auto* r = entries.find("test_net.depth")) net.depth = parse_number<std::size_t>("test_net.depth", *r);
    if (const auto* r = entries.find("test_net.channels")) {
      net.channels = parse_number<std::size_t>("test_net.channels", *r);
    }
    if (net.depth < 1 || net.channels < 1) {
      throw ConfigError(ConfigErrc::InvalidValue, "test_net.depth and test_net.channels must be >= 1");
    }
    cfg.network = net;
  } else {
    throw ConfigError(ConfigErrc::MissingKey, "missing network source: weights or test_net.seed");
  }

  // Segmentation source.
  const int sources = static_cast<int>(entries.has("unary")) +
                      static_cast<int>(entries.has("seeds.fg") || entries.has("seeds.bg")) +
                      static_cast<int>(entries.has("mask"));
  if (sources > 1) throw ConfigError(ConfigErrc::Conflict, "unary, seeds.* and mask are mutually exclusive");
  if (sources == 0) throw ConfigError(ConfigErrc::MissingKey, "missing segmentation source: unary, seeds.fg/.bg or mask");
  if (entries.has("unary")) {
    require_non_empty("unary", *entries.find("unary"));
    cfg.segmentation = UnaryFile{entries.path("unary")};
  } else if (entries.has("mask")) {
    require_non_empty("mask", *entries.find("mask"));
    cfg.segmentation = MaskFile{entries.path("mask")};
  } else {
    if (!entries.has("seeds.fg")) throw ConfigError(ConfigErrc::MissingKey, "missing required key: seeds.fg");
    if (!entries.has("seeds.bg")) throw ConfigError(ConfigErrc::MissingKey, "missing required key: seeds.bg");
    cfg.segmentation = SeedLists{parse_pixels("seeds.fg", *entries.find("seeds.fg")),
                                 parse_pixels("seeds.bg", *entries.find("seeds.bg"))};
  }

  if (const auto* r = entries.find("crf.w_app")) cfg.crf.w_appearance = parse_number<double>("crf.w_app", *r);
  if (const auto* r = entries.find("crf.theta_alpha")) cfg.crf.theta_alpha = parse_number<double>("crf.theta_alpha", *r);
  if (const auto* r = entries.find("crf.theta_beta")) cfg.crf.theta_beta = parse_number<double>("crf.theta_beta", *r);
  if (const auto* r = entries.find("crf.w_smooth")) cfg.crf.w_smooth = parse_number<double>("crf.w_smooth", *r);
  if (const auto* r = entries.find("crf.theta_gamma")) cfg.crf.theta_gamma = parse_number<double>("crf.theta_gamma", *r);
  if (const auto* r = entries.find("crf.iters")) cfg.crf_iterations = parse_number<std::size_t>("crf.iters", *r);

  if (const auto* r = entries.find("synth.layers")) cfg.synth.layer_indices = parse_list<std::size_t>("synth.layers", *r);
  if (const auto* r = entries.find("synth.weights")) cfg.synth.layer_weights = parse_list<float>("synth.weights", *r);
  if (const auto* r = entries.find("synth.init")) cfg.synth.init_mode = parse_init(*r);
  if (const auto* r = entries.find("synth.step")) cfg.synth.step_size = parse_number<double>("synth.step", *r);
  if (const auto* r = entries.find("synth.max_iters")) {
    cfg.synth.max_iterations = parse_number<std::size_t>("synth.max_iters", *r);
  }
  if (const auto* r = entries.find("synth.tol")) cfg.synth.convergence_tol = parse_number<double>("synth.tol", *r);
  if (const auto* r = entries.find("synth.mean")) cfg.synth.channel_mean = parse_list<float>("synth.mean", *r);
  if (!cfg.synth.layer_weights.empty() && cfg.synth.layer_weights.size() != cfg.synth.layer_indices.size()) {
    throw ConfigError(ConfigErrc::InvalidValue, "synth.weights must list one weight per synth.layers entry",
                      entries.find("synth.weights")->line);
  }
  if (const auto* r = entries.find("feather.radius")) cfg.feather.radius = parse_number<std::size_t>("feather.radius", *r);

  if (!entries.has("out.image")) throw ConfigError(ConfigErrc::MissingKey, "missing required key: out.image");
  require_non_empty("out.image", *entries.find("out.image"));
  cfg.out_image = entries.path("out.image");
  if (entries.has("out.masks")) cfg.out_masks = entries.path("out.masks");
  if (entries.has("out.trace")) cfg.out_trace = entries.path("out.trace");

  try {
    cfg.crf.validate();
    cfg.synth.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.code(), e.what());
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  PipelineConfig cfg = parse_config(text.str());
  cfg.base_dir = path.parent_path();
  return cfg;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_float(float v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += fmt(items[i]);
  }
  return out;
}

}  // namespace

std::string emit_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "content = " << cfg.content << '\n';
  for (const auto& [label, style] : cfg.styles) {
    out << "style." << label << " = " << style.image << '\n';
    if (style.mask) out << "style_mask." << label << " = " << *style.mask << '\n';
  }
  if (const auto* w = std::get_if<WeightsFile>(&cfg.network)) {
    out << "weights = " << w->path << '\n';
  } else {
    const auto& t = std::get<TestNetSource>(cfg.network);
    out << "test_net.seed = " << t.seed << "\ntest_net.depth = " << t.depth << "\ntest_net.channels = " << t.channels
        << '\n';
  }
  auto pixel = [](const Pixel& p) { return std::to_string(p.row) + "," + std::to_string(p.col); };
  if (const auto* u = std::get_if<UnaryFile>(&cfg.segmentation)) {
    out << "unary = " << u->path << '\n';
  } else if (const auto* m = std::get_if<MaskFile>(&cfg.segmentation)) {
    out << "mask = " << m->path << '\n';
  } else {
    const auto& s = std::get<SeedLists>(cfg.segmentation);
    out << "seeds.fg = " << join(s.fg, pixel, "; ") << '\n';
    out << "seeds.bg = " << join(s.bg, pixel, "; ") << '\n';
  }
  out << "crf.w_app = " << fmt_double(cfg.crf.w_appearance) << '\n'
      << "crf.theta_alpha = " << fmt_double(cfg.crf.theta_alpha) << '\n'
      << "crf.theta_beta = " << fmt_double(cfg.crf.theta_beta) << '\n'
      << "crf.w_smooth = " << fmt_double(cfg.crf.w_smooth) << '\n'
      << "crf.theta_gamma = " << fmt_double(cfg.crf.theta_gamma) << '\n'
      << "crf.iters = " << cfg.crf_iterations << '\n';
  if (!cfg.synth.layer_indices.empty()) {
    out << "synth.layers = " << join(cfg.synth.layer_indices, [](std::size_t v) { return std::to_string(v); }) << '\n';
  }
  if (!cfg.synth.layer_weights.empty()) out << "synth.weights = " << join(cfg.synth.layer_weights, fmt_float) << '\n';
  out << "synth.init = " << (cfg.synth.init_mode == InitMode::ContentImage ? "content" : "noise") << '\n'
      << "synth.step = " << fmt_double(cfg.synth.step_size) << '\n'
      << "synth.max_iters = " << cfg.synth.max_iterations << '\n'
      << "synth.tol = " << fmt_double(cfg.synth.convergence_tol) << '\n';
  if (!cfg.synth.channel_mean.empty()) out << "synth.mean = " << join(cfg.synth.channel_mean, fmt_float) << '\n';
  out << "feather.radius = " << cfg.feather.radius << '\n';
  out << "out.image = " << cfg.out_image << '\n';
  if (cfg.out_masks) out << "out.masks = " << *cfg.out_masks << '\n';
  if (cfg.out_trace) out << "out.trace = " << *cfg.out_trace << '\n';
  return out.str();
}

}  // namespace texturesmith
