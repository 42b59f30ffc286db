#include "hdrunet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hdrunet/errors.hpp"

namespace hdrunet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_double(std::string_view text, double& out) {
  std::string buf(text);
  std::istringstream is(buf);
  is.imbue(std::locale::classic());
  is >> out;
  return !is.fail() && is.eof();
}

bool parse_bool(std::string_view text, bool& out) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0" || text == "off" || text == "no") {
    out = false;
    return true;
  }
  return false;
}

// Returns false when the value does not parse.
using Setter = std::function<bool(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto size = [&](const char* key, auto field) {
      t[key] = [field](RunConfig& c, std::string_view v) { return parse_int(v, field(c)); };
    };
    auto real = [&](const char* key, auto field) {
      t[key] = [field](RunConfig& c, std::string_view v) { return parse_double(v, field(c)); };
    };
    size("base_channels", [](RunConfig& c) -> std::size_t& { return c.model.base_channels; });
    size("n_res_blocks", [](RunConfig& c) -> std::size_t& { return c.model.n_res_blocks; });
    size("n_scales", [](RunConfig& c) -> std::size_t& { return c.model.n_scales; });
    t["modulation"] = [](RunConfig& c, std::string_view v) {
      try {
        c.model.modulation = parse_modulation(v);
        return true;
      } catch (const ConfigError&) {
        return false;
      }
    };
    t["weighting"] = [](RunConfig& c, std::string_view v) { return parse_bool(v, c.model.weighting_enabled); };
    t["precision"] = [](RunConfig& c, std::string_view v) {
      if (v == "f32") {
        c.model.precision = Precision::F32;
      } else if (v == "f64") {
        c.model.precision = Precision::F64;
      } else {
        return false;
      }
      return true;
    };

    size("batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    size("patch_size", [](RunConfig& c) -> std::size_t& { return c.train.patch_size; });
    size("total_iters", [](RunConfig& c) -> std::size_t& { return c.train.total_iters; });
    size("eval_every", [](RunConfig& c) -> std::size_t& { return c.train.eval_every; });
    size("checkpoint_every", [](RunConfig& c) -> std::size_t& { return c.train.checkpoint_every; });
    size("decay_every", [](RunConfig& c) -> std::size_t& { return c.train.schedule.decay_every; });
    t["seed"] = [](RunConfig& c, std::string_view v) { return parse_int(v, c.train.seed); };
    t["loss"] = [](RunConfig& c, std::string_view v) {
      try {
        c.train.loss = parse_loss(v);
        return true;
      } catch (const ConfigError&) {
        return false;
      }
    };
    real("lr", [](RunConfig& c) -> double& { return c.train.schedule.initial_lr; });
    real("decay_factor", [](RunConfig& c) -> double& { return c.train.schedule.decay_factor; });

    real("exposure_gain", [](RunConfig& c) -> double& { return c.degradation.exposure_gain; });
    real("noise_sigma", [](RunConfig& c) -> double& { return c.degradation.noise_sigma; });
    t["quant_bits"] = [](RunConfig& c, std::string_view v) { return parse_int(v, c.degradation.quant_bits); };
    real("clip_low", [](RunConfig& c) -> double& { return c.degradation.clip_low; });
    real("clip_high", [](RunConfig& c) -> double& { return c.degradation.clip_high; });

    real("mu", [](RunConfig& c) -> double& { return c.metrics.mu; });
    real("percentile", [](RunConfig& c) -> double& { return c.metrics.percentile; });
    real("psnr_cap_db", [](RunConfig& c) -> double& { return c.metrics.psnr_cap_db; });
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  degradation.validate();
  metrics.validate();
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  cfg.train.metrics = cfg.metrics;
  std::vector<std::string> problems;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no);
    if (eq == std::string_view::npos) {
      problems.push_back(where + ": expected key = value");
      continue;
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      problems.push_back(where + ": unknown key '" + std::string(key) + "'");
    } else if (!it->second(cfg, value)) {
      problems.push_back(where + ": invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
    }
  }
  if (!problems.empty()) {
    std::string msg = "config rejected:";
    for (const auto& p : problems) {
      msg += "\n  " + p;
    }
    throw ConfigError(msg);
  }
  cfg.train.metrics = cfg.metrics;
  cfg.degradation.seed = cfg.train.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read config '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << "base_channels = " << c.model.base_channels << "\n"
     << "n_res_blocks = " << c.model.n_res_blocks << "\n"
     << "n_scales = " << c.model.n_scales << "\n"
     << "modulation = " << to_string(c.model.modulation) << "\n"
     << "weighting = " << (c.model.weighting_enabled ? "true" : "false") << "\n"
     << "precision = " << (c.model.precision == Precision::F32 ? "f32" : "f64") << "\n"
     << "batch_size = " << c.train.batch_size << "\n"
     << "patch_size = " << c.train.patch_size << "\n"
     << "total_iters = " << c.train.total_iters << "\n"
     << "loss = " << to_string(c.train.loss) << "\n"
     << "seed = " << c.train.seed << "\n"
     << "eval_every = " << c.train.eval_every << "\n"
     << "checkpoint_every = " << c.train.checkpoint_every << "\n"
     << "lr = " << c.train.schedule.initial_lr << "\n"
     << "decay_factor = " << c.train.schedule.decay_factor << "\n"
     << "decay_every = " << c.train.schedule.decay_every << "\n"
     << "exposure_gain = " << c.degradation.exposure_gain << "\n"
     << "noise_sigma = " << c.degradation.noise_sigma << "\n"
     << "quant_bits = " << c.degradation.quant_bits << "\n"
     << "clip_low = " << c.degradation.clip_low << "\n"
     << "clip_high = " << c.degradation.clip_high << "\n"
     << "mu = " << c.metrics.mu << "\n"
     << "percentile = " << c.metrics.percentile << "\n"
     << "psnr_cap_db = " << c.metrics.psnr_cap_db << "\n";
  return os.str();
}

}  // namespace hdrunet
