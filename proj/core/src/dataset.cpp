// Copyright 2026 The dcac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dcac/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dcac/error.hpp"
#include "dcac/serialize.hpp"

namespace dcac {

namespace fs = std::filesystem;

void WorldConfig::validate() const {
  if (num_glosses < 2) throw ConfigError("world needs at least two glosses");
  if (channels < 1 || height < 4 || width < 4) throw ConfigError("world frame extents too small");
  if (min_duration < 2 || max_duration < min_duration) throw ConfigError("bad duration range");
  if (min_len < 1 || max_len < min_len) throw ConfigError("bad sentence length range");
  if (canvas_margin < 0) throw ConfigError("canvas margin must be >= 0");
  if (stretch_min <= 0 || stretch_max < stretch_min) throw ConfigError("bad stretch range");
}

GlossSequence sample_labels(const WorldConfig& world, Rng& rng) {
  const int n = static_cast<int>(rng.uniform_int(world.min_len, world.max_len));
  GlossSequence labels(n);
  for (auto& g : labels) g = static_cast<int>(rng.uniform_int(1, world.num_glosses));
  return labels;
}

namespace {

struct GlossStyle {
  double angle;
  double speed;
  double sigma_along;
  double sigma_across;
};

// Appearance encodes orientation and thickness; direction along the axis is
// only visible through motion, so half the pairs need temporal context.
GlossStyle style_of(int gloss, int num_glosses) {
  GlossStyle s;
  s.angle = 2.0 * 3.141592653589793 * static_cast<double>(gloss - 1) / num_glosses;
  s.speed = 0.30 + 0.15 * static_cast<double>((gloss - 1) % 3);
  s.sigma_along = 2.2;
  s.sigma_across = (gloss - 1) < num_glosses / 2 ? 0.7 : 1.6;
  return s;
}

// Renders one gloss clip on the padded canvas, appending frames.
void render_clip(std::vector<std::vector<double>>& frames, const WorldConfig& world, int gloss,
                 int duration, Rng& rng) {
  const std::int64_t ch = world.height + 2 * world.canvas_margin;
  const std::int64_t cw = world.width + 2 * world.canvas_margin;
  GlossStyle st = style_of(gloss, world.num_glosses);
  const double angle = st.angle + rng.uniform(-0.08, 0.08);
  const double ca = std::cos(angle), sa = std::sin(angle);

  double vx = st.speed * ca, vy = st.speed * sa;
  const double border = 1.5;
  auto feasible_start = [&](double span, double disp, Rng& r) {
    double lo = border + std::max(0.0, -disp);
    double hi = span - 1.0 - border - std::max(0.0, disp);
    if (hi < lo) {  // trajectory longer than the canvas: center it
      return (span - 1.0 - disp) / 2.0;
    }
    return r.uniform(lo, hi);
  };
  const double dx = vx * (duration - 1), dy = vy * (duration - 1);
  double x0 = feasible_start(static_cast<double>(cw), dx, rng);
  double y0 = feasible_start(static_cast<double>(ch), dy, rng);

  for (int f = 0; f < duration; ++f) {
    std::vector<double> frame(static_cast<std::size_t>(ch * cw), 0.0);
    const double cx = x0 + vx * f, cy = y0 + vy * f;
    for (std::int64_t y = 0; y < ch; ++y) {
      for (std::int64_t x = 0; x < cw; ++x) {
        const double rx = static_cast<double>(x) - cx;
        const double ry = static_cast<double>(y) - cy;
        const double u = rx * ca + ry * sa;       // along motion
        const double v = -rx * sa + ry * ca;      // across motion
        const double e = 0.5 * (u * u / (st.sigma_along * st.sigma_along) +
                                v * v / (st.sigma_across * st.sigma_across));
        if (e < 12.0) frame[y * cw + x] = std::exp(-e);
      }
    }
    frames.push_back(std::move(frame));
  }
}

std::int64_t adjacent_repeats(const GlossSequence& labels) {
  std::int64_t r = 0;
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++r;
  }
  return r;
}

}  // namespace

Tensor stretch_video(const Tensor& video, double factor, std::int64_t min_frames) {
  if (video.rank() != 4) throw ShapeError("stretch_video expects [C,T,H,W]");
  const std::int64_t c = video.shape()[0], t = video.shape()[1];
  const std::int64_t h = video.shape()[2], w = video.shape()[3];
  std::int64_t new_t = std::max<std::int64_t>(
      min_frames, static_cast<std::int64_t>(std::llround(static_cast<double>(t) * factor)));
  new_t = std::max<std::int64_t>(new_t, 1);
  if (new_t == t) return video;

  Tensor out = Tensor::zeros({c, new_t, h, w});
  const std::int64_t plane = h * w;
  for (std::int64_t ti = 0; ti < new_t; ++ti) {
    const auto src = std::min<std::int64_t>(
        t - 1, static_cast<std::int64_t>((static_cast<double>(ti) + 0.5) *
                                         static_cast<double>(t) / static_cast<double>(new_t)));
    for (std::int64_t ci = 0; ci < c; ++ci) {
      std::copy_n(video.data() + (ci * t + src) * plane, plane,
                  out.data() + (ci * new_t + ti) * plane);
    }
  }
  return out;
}

Sample make_sample(const WorldConfig& world, std::uint64_t seed, const std::string& split,
                   std::int64_t index) {
  world.validate();
  Rng rng = named_rng(seed, split + "/" + std::to_string(index));

  Sample s;
  s.id = split + "_" + std::to_string(index);
  s.labels = sample_labels(world, rng);

  std::vector<std::vector<double>> canvas_frames;
  for (const int g : s.labels) {
    const int duration = static_cast<int>(rng.uniform_int(world.min_duration, world.max_duration));
    render_clip(canvas_frames, world, g, duration, rng);
  }
  const std::int64_t t = static_cast<std::int64_t>(canvas_frames.size());
  const std::int64_t ch = world.height + 2 * world.canvas_margin;
  const std::int64_t cw = world.width + 2 * world.canvas_margin;

  Tensor canvas = Tensor::zeros({world.channels, t, ch, cw});
  for (std::int64_t ti = 0; ti < t; ++ti) {
    for (std::int64_t ci = 0; ci < world.channels; ++ci) {
      std::copy(canvas_frames[ti].begin(), canvas_frames[ti].end(),
                canvas.data() + (ci * t + ti) * ch * cw);
    }
  }

  // Feasibility floor: after two temporal halvings the frame count must
  // still cover the labels plus separator blanks.
  const std::int64_t min_frames = 4 * (static_cast<std::int64_t>(s.labels.size()) +
                                       adjacent_repeats(s.labels)) + 4;
  if (rng.uniform() < world.stretch_prob) {
    const double factor = rng.uniform(world.stretch_min, world.stretch_max);
    canvas = stretch_video(canvas, factor, min_frames);
  }

  const std::int64_t final_t = canvas.shape()[1];
  const std::int64_t ox = rng.uniform_int(0, 2 * world.canvas_margin);
  const std::int64_t oy = rng.uniform_int(0, 2 * world.canvas_margin);
  s.video = Tensor::zeros({world.channels, final_t, world.height, world.width});
  for (std::int64_t ci = 0; ci < world.channels; ++ci) {
    for (std::int64_t ti = 0; ti < final_t; ++ti) {
      for (std::int64_t y = 0; y < world.height; ++y) {
        const double* src = canvas.data() + ((ci * final_t + ti) * ch + y + oy) * cw + ox;
        double* dst = s.video.data() + ((ci * final_t + ti) * world.height + y) * world.width;
        for (std::int64_t x = 0; x < world.width; ++x) {
          dst[x] = src[x] + rng.normal(0.0, world.noise_sigma);
        }
      }
    }
  }
  return s;
}

std::vector<Sample> generate_split(const WorldConfig& world, std::uint64_t seed,
                                   const std::string& split, std::int64_t count) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(make_sample(world, seed, split, i));
  return out;
}

namespace {

nlohmann::ordered_json world_to_json(const WorldConfig& w) {
  return {{"num_glosses", w.num_glosses}, {"channels", w.channels}, {"height", w.height},
          {"width", w.width},             {"canvas_margin", w.canvas_margin},
          {"min_duration", w.min_duration}, {"max_duration", w.max_duration},
          {"min_len", w.min_len},         {"max_len", w.max_len},
          {"noise_sigma", w.noise_sigma}, {"stretch_prob", w.stretch_prob},
          {"stretch_min", w.stretch_min}, {"stretch_max", w.stretch_max}};
}

}  // namespace

void generate_dataset(const WorldConfig& world, std::uint64_t seed, const std::string& out_dir,
                      std::int64_t n_train, std::int64_t n_dev) {
  world.validate();
  if (n_train < 1 || n_dev < 1) throw ConfigError("need at least one sample per split");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  nlohmann::ordered_json index;
  index["format"] = "dcac-dataset-v1";
  index["seed"] = seed;
  index["world"] = world_to_json(world);

  for (const auto& [split, count] :
       std::vector<std::pair<std::string, std::int64_t>>{{"train", n_train}, {"dev", n_dev}}) {
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (std::int64_t i = 0; i < count; ++i) {
      Sample s = make_sample(world, seed, split, i);
      const std::string file = s.id + ".dct";
      save_tensor((fs::path(out_dir) / file).string(), s.video);
      entries.push_back({{"id", s.id},
                         {"file", file},
                         {"gloss_ids", s.labels},
                         {"T", s.video.shape()[1]}});
    }
    index["splits"][split] = std::move(entries);
  }

  std::ofstream os(fs::path(out_dir) / "index.json");
  if (!os) throw IoError("cannot write index.json in " + out_dir);
  os << index.dump(2) << "\n";
}

std::vector<Sample> load_dataset(const std::string& dir, const std::string& split) {
  std::ifstream is(fs::path(dir) / "index.json");
  if (!is) throw IoError("cannot open index.json in " + dir);
  nlohmann::json index;
  try {
    is >> index;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed index.json: ") + e.what());
  }
  if (!index.contains("splits") || !index["splits"].contains(split)) {
    throw IoError("index.json has no split '" + split + "'");
  }
  std::vector<Sample> out;
  for (const auto& entry : index["splits"][split]) {
    Sample s;
    s.id = entry["id"].get<std::string>();
    s.labels = entry["gloss_ids"].get<GlossSequence>();
    s.video = load_tensor((fs::path(dir) / entry["file"].get<std::string>()).string());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dcac
