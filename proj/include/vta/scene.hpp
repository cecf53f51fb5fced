#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vta/common.hpp"
#include "vta/io.hpp"
#include "vta/rng.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Synthetic audio-visual scenes. A scene is a timeline of object/sound events
// from which symbolic video frames, an audio waveform and a caption are all
// rendered deterministically. This gives every alignment claim an exact
// ground truth.

enum class SoundClass { kBeep, kBurst, kChirp, kThump };

inline const char* to_string(SoundClass c) {
  switch (c) {
    case SoundClass::kBeep: return "beep";
    case SoundClass::kBurst: return "burst";
    case SoundClass::kChirp: return "chirp";
    case SoundClass::kThump: return "thump";
  }
  return "?";
}

inline SoundClass sound_class_from_string(const std::string& s) {
  if (s == "beep") return SoundClass::kBeep;
  if (s == "burst") return SoundClass::kBurst;
  if (s == "chirp") return SoundClass::kChirp;
  if (s == "thump") return SoundClass::kThump;
  throw DataError("unknown sound class '" + s + "'");
}

struct SceneEvent {
  std::string object_label;  // non-empty lowercase token
  SoundClass sound_class = SoundClass::kBeep;
  double onset_s = 0.0;
  double offset_s = 0.0;  // > onset_s, <= scene duration
  double base_freq_hz = 440.0;

  bool operator==(const SceneEvent&) const = default;
};

struct SceneScript {
  double duration_s = 0.0;
  int fps = 0;
  int sample_rate_hz = 0;
  std::vector<SceneEvent> events;  // sorted by onset
  std::string caption;
  std::uint64_t seed = 0;

  bool operator==(const SceneScript&) const = default;
};

struct SymbolicFrame {
  int index = 0;
  // (label, visibility), sorted by label. Set semantics: one entry per label.
  std::vector<std::pair<std::string, double>> active_objects;
};

// Generation bounds. Defaults produce the alignment corpus: events sustain to
// the scene end (so every embedding change is an appearance), onsets are
// spaced by at least min_onset_gap_s, labels are distinct within a scene.
struct GenerationBounds {
  int events_min = 1;
  int events_max = 3;
  double duration_min_s = 3.0;
  double duration_max_s = 3.0;
  int fps = 8;
  int sample_rate_hz = 16000;
  double min_onset_gap_s = 0.7;
  double head_margin_s = 0.2;   // earliest onset
  double tail_margin_s = 0.5;   // latest onset before scene end
  bool sustain_to_end = true;   // offsets at scene end; otherwise random
  std::vector<std::string> labels;  // label pool; default lexicon when empty
};

// 50 lowercase nouns; also the default grounding lexicon.
inline const std::vector<std::string>& default_lexicon() {
  static const std::vector<std::string> kWords = {
      "dog",    "car",    "cat",    "bird",   "train",  "bell",   "drum",
      "horn",   "clock",  "phone",  "door",   "glass",  "hammer", "whistle",
      "engine", "guitar", "piano",  "violin", "flute",  "siren",  "truck",
      "boat",   "plane",  "horse",  "cow",    "sheep",  "duck",   "frog",
      "owl",    "wolf",   "lion",   "monkey", "robot",  "saw",    "fan",
      "kettle", "radio",  "camera", "printer", "keyboard", "switch", "motor",
      "pump",   "valve",  "spring", "gear",   "chain",  "anvil",  "gong",
      "chime"};
  return kWords;
}

namespace detail {

struct ClassProfile {
  double freq_lo, freq_hi;  // base frequency range
  double amplitude;
  double decay_tau_s;  // exponential decay after the attack
};

inline const ClassProfile& class_profile(SoundClass c) {
  static const ClassProfile kBeep{200.0, 900.0, 0.50, 0.18};
  static const ClassProfile kBurst{400.0, 1200.0, 0.35, 0.12};
  static const ClassProfile kChirp{150.0, 500.0, 0.45, 0.25};
  static const ClassProfile kThump{40.0, 90.0, 0.60, 0.10};
  switch (c) {
    case SoundClass::kBeep: return kBeep;
    case SoundClass::kBurst: return kBurst;
    case SoundClass::kChirp: return kChirp;
    case SoundClass::kThump: return kThump;
  }
  return kBeep;
}

constexpr double kAttackS = 0.008;

}  // namespace detail

inline void validate_bounds(const GenerationBounds& b) {
  require_config(b.events_min >= 1 && b.events_max <= 8 && b.events_min <= b.events_max,
                 "generation bounds: events must satisfy 1 <= min <= max <= 8");
  require_config(b.duration_min_s >= 2.0 && b.duration_max_s <= 10.0 &&
                     b.duration_min_s <= b.duration_max_s,
                 "generation bounds: duration must lie in [2, 10] s");
  require_config(b.fps > 0, "generation bounds: fps must be positive");
  require_config(b.sample_rate_hz > 0, "generation bounds: sample rate must be positive");
  require_config(b.min_onset_gap_s > 0, "generation bounds: onset gap must be positive");
}

inline std::string caption_for_labels(const std::vector<std::string>& labels) {
  std::string caption = "a scene with";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) caption += " and";
    caption += " a " + labels[i];
  }
  return caption;
}

// Pure function of (seed, bounds).
inline SceneScript generate_scene(std::uint64_t seed, const GenerationBounds& bounds) {
  validate_bounds(bounds);
  const std::vector<std::string>& pool =
      bounds.labels.empty() ? default_lexicon() : bounds.labels;
  require_config(static_cast<int>(pool.size()) >= bounds.events_max,
                 "generation bounds: label pool smaller than events_max");

  Rng rng = Rng::stream(seed, "scene");
  SceneScript script;
  script.seed = seed;
  script.fps = bounds.fps;
  script.sample_rate_hz = bounds.sample_rate_hz;
  script.duration_s = bounds.duration_min_s == bounds.duration_max_s
                          ? bounds.duration_min_s
                          : rng.uniform(bounds.duration_min_s, bounds.duration_max_s);

  // Onset slots limited by the available span and the minimum gap.
  const double span = script.duration_s - bounds.head_margin_s - bounds.tail_margin_s;
  const int max_slots = 1 + static_cast<int>(std::floor(span / bounds.min_onset_gap_s));
  int n_events = rng.uniform_int(bounds.events_min, bounds.events_max);
  n_events = std::max(1, std::min(n_events, max_slots));

  // Distinct labels via a partial Fisher-Yates shuffle.
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (int i = 0; i < n_events; ++i) {
    const int j = rng.uniform_int(i, static_cast<int>(idx.size()) - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }

  // Sorted onsets with the required minimum gap; falls back to an evenly
  // spaced grid with jitter when rejection sampling runs out of tries.
  std::vector<double> onsets(static_cast<std::size_t>(n_events));
  const double lo = bounds.head_margin_s;
  const double hi = script.duration_s - bounds.tail_margin_s;
  bool ok = false;
  for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
    for (auto& t : onsets) t = rng.uniform(lo, hi);
    std::sort(onsets.begin(), onsets.end());
    ok = true;
    for (std::size_t i = 1; i < onsets.size(); ++i)
      if (onsets[i] - onsets[i - 1] < bounds.min_onset_gap_s) ok = false;
  }
  if (!ok) {
    const double step = (hi - lo) / static_cast<double>(n_events);
    for (int i = 0; i < n_events; ++i)
      onsets[static_cast<std::size_t>(i)] =
          lo + step * i + rng.uniform(0.0, step * 0.25);
  }

  std::vector<std::string> labels;
  for (int i = 0; i < n_events; ++i) {
    SceneEvent ev;
    ev.object_label = pool[idx[static_cast<std::size_t>(i)]];
    ev.sound_class = static_cast<SoundClass>(rng.uniform_int(0, 3));
    const auto& prof = detail::class_profile(ev.sound_class);
    ev.base_freq_hz = rng.uniform(prof.freq_lo, prof.freq_hi);
    ev.onset_s = onsets[static_cast<std::size_t>(i)];
    ev.offset_s = bounds.sustain_to_end
                      ? script.duration_s
                      : std::min(script.duration_s,
                                 ev.onset_s + rng.uniform(0.4, std::max(
                                     0.4, script.duration_s - ev.onset_s)));
    script.events.push_back(ev);
    labels.push_back(ev.object_label);
  }
  std::sort(script.events.begin(), script.events.end(),
            [](const SceneEvent& a, const SceneEvent& b) { return a.onset_s < b.onset_s; });
  labels.clear();
  for (const auto& ev : script.events) labels.push_back(ev.object_label);
  script.caption = caption_for_labels(labels);
  return script;
}

inline void validate_script(const SceneScript& script) {
  require(script.duration_s > 0, "scene: duration must be positive");
  require(script.fps > 0, "scene: fps must be positive");
  require(script.sample_rate_hz > 0, "scene: sample rate must be positive");
  for (const auto& ev : script.events) {
    require(!ev.object_label.empty(), "scene: empty object label");
    require(ev.offset_s > ev.onset_s && ev.onset_s >= 0, "scene: bad event interval");
    require(ev.offset_s <= script.duration_s + 1e-12, "scene: event past scene end");
    require(ev.base_freq_hz > 0, "scene: base frequency must be positive");
  }
}

// Frame i covers time i/fps; an object is visible iff that time falls inside
// one of its event intervals.
inline std::vector<SymbolicFrame> render_frames(const SceneScript& script) {
  validate_script(script);
  const int n = static_cast<int>(std::floor(script.duration_s * script.fps));
  std::vector<SymbolicFrame> frames(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SymbolicFrame& f = frames[static_cast<std::size_t>(i)];
    f.index = i;
    const double t = static_cast<double>(i) / script.fps;
    std::map<std::string, double> active;
    for (const auto& ev : script.events)
      if (t >= ev.onset_s && t < ev.offset_s) {
        auto [it, inserted] = active.emplace(ev.object_label, 1.0);
        if (!inserted) it->second = std::max(it->second, 1.0);
      }
    f.active_objects.assign(active.begin(), active.end());
  }
  return frames;
}

namespace detail {

// Renders one event's sound primitive into the buffer. Support is exactly
// [onset, offset): sample i is touched iff onset <= i/sr < offset.
inline void synth_event_into(std::vector<double>& buf, const SceneScript& script,
                             std::size_t event_index) {
  const SceneEvent& ev = script.events[event_index];
  const int sr = script.sample_rate_hz;
  const auto begin = static_cast<std::size_t>(std::ceil(ev.onset_s * sr));
  auto end = static_cast<std::size_t>(std::ceil(ev.offset_s * sr));
  end = std::min(end, buf.size());
  const auto& prof = class_profile(ev.sound_class);
  const double len_s = ev.offset_s - ev.onset_s;
  Rng noise = Rng::stream(script.seed, "audio.event", event_index);
  for (std::size_t i = begin; i < end; ++i) {
    const double t = static_cast<double>(i) / sr - ev.onset_s;
    double env = prof.amplitude;
    if (t < kAttackS)
      env *= t / kAttackS;
    else
      env *= std::exp(-(t - kAttackS) / prof.decay_tau_s);
    double carrier = 0.0;
    switch (ev.sound_class) {
      case SoundClass::kBeep:
        carrier = std::sin(2.0 * M_PI * ev.base_freq_hz * t);
        break;
      case SoundClass::kBurst:
        carrier = noise.uniform(-1.0, 1.0);
        break;
      case SoundClass::kChirp:
        // Linear sweep from f to 2f across the event.
        carrier = std::sin(2.0 * M_PI * ev.base_freq_hz * (t + t * t / (2.0 * len_s)));
        break;
      case SoundClass::kThump:
        carrier = std::sin(2.0 * M_PI * ev.base_freq_hz * t);
        break;
    }
    buf[i] += env * carrier;
  }
}

}  // namespace detail

// Events sum into the buffer, then the mix is clipped to [-1, 1]. Samples
// outside every event stay exactly 0.
inline std::vector<double> render_audio(const SceneScript& script) {
  validate_script(script);
  const auto n = static_cast<std::size_t>(
      std::llround(script.duration_s * script.sample_rate_hz));
  std::vector<double> buf(n, 0.0);
  for (std::size_t e = 0; e < script.events.size(); ++e)
    detail::synth_event_into(buf, script, e);
  for (auto& s : buf) s = std::clamp(s, -1.0, 1.0);
  return buf;
}

// ---------------------------------------------------------------------------
// Dataset persistence. Layout:
//   <dir>/manifest      header + one record per scene
//   <dir>/NNNN.script   structured text
//   <dir>/NNNN.pcm      rendered waveform, float32 LE mono

struct Dataset {
  int sample_rate_hz = 0;
  int fps = 0;
  std::vector<SceneScript> scenes;
  std::vector<std::string> audio_paths;  // relative to dir
  fs::path dir;
};

inline std::string scene_stem(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return std::string(buf);
}

inline std::string serialize_script(const SceneScript& s) {
  std::ostringstream out;
  out << "vta-scene v1\n";
  out << "seed = " << s.seed << "\n";
  out << "duration_s = " << fmt_double(s.duration_s) << "\n";
  out << "fps = " << s.fps << "\n";
  out << "sample_rate_hz = " << s.sample_rate_hz << "\n";
  out << "caption = " << s.caption << "\n";
  out << "events = " << s.events.size() << "\n";
  for (const auto& ev : s.events)
    out << "event label=" << ev.object_label << " class=" << to_string(ev.sound_class)
        << " onset=" << fmt_double(ev.onset_s) << " offset=" << fmt_double(ev.offset_s)
        << " freq=" << fmt_double(ev.base_freq_hz) << "\n";
  return out.str();
}

inline SceneScript parse_script(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  auto fail = [&](const std::string& why) -> DataError {
    return DataError("script " + origin + ": " + why);
  };
  if (!std::getline(in, line) || trim(line) != "vta-scene v1") throw fail("bad header");
  SceneScript s;
  auto kv = [&](const std::string& key) {
    if (!std::getline(in, line)) throw fail("truncated before '" + key + "'");
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)) != key)
      throw fail("expected '" + key + "' line, got '" + line + "'");
    return trim(line.substr(eq + 1));
  };
  s.seed = static_cast<std::uint64_t>(parse_long(kv("seed"), origin));
  s.duration_s = parse_double(kv("duration_s"), origin);
  s.fps = static_cast<int>(parse_long(kv("fps"), origin));
  s.sample_rate_hz = static_cast<int>(parse_long(kv("sample_rate_hz"), origin));
  s.caption = kv("caption");
  const long n_events = parse_long(kv("events"), origin);
  for (long e = 0; e < n_events; ++e) {
    if (!std::getline(in, line)) throw fail("truncated at event " + std::to_string(e));
    const auto toks = split_ws(line);
    if (toks.size() != 6 || toks[0] != "event")
      throw fail("bad event line " + std::to_string(e) + ": '" + line + "'");
    SceneEvent ev;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      const auto eq = toks[i].find('=');
      if (eq == std::string::npos) throw fail("bad event field '" + toks[i] + "'");
      const std::string key = toks[i].substr(0, eq);
      const std::string val = toks[i].substr(eq + 1);
      if (key == "label")
        ev.object_label = val;
      else if (key == "class")
        ev.sound_class = sound_class_from_string(val);
      else if (key == "onset")
        ev.onset_s = parse_double(val, origin);
      else if (key == "offset")
        ev.offset_s = parse_double(val, origin);
      else if (key == "freq")
        ev.base_freq_hz = parse_double(val, origin);
      else
        throw fail("unknown event field '" + key + "'");
    }
    s.events.push_back(ev);
  }
  return s;
}

// Renders and persists every scene. Round trip of the scripts is lossless.
inline void save_dataset(const std::vector<SceneScript>& scenes, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create dataset dir: " + dir.string());
  std::ostringstream manifest;
  manifest << "vta-dataset v1\n";
  if (!scenes.empty()) {
    manifest << "sample_rate_hz = " << scenes[0].sample_rate_hz << "\n";
    manifest << "fps = " << scenes[0].fps << "\n";
  } else {
    manifest << "sample_rate_hz = 0\nfps = 0\n";
  }
  manifest << "count = " << scenes.size() << "\n";
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string stem = scene_stem(i);
    write_file_atomic(dir / (stem + ".script"), serialize_script(scenes[i]));
    write_pcm(dir / (stem + ".pcm"), render_audio(scenes[i]));
    manifest << "scene index=" << i << " seed=" << scenes[i].seed
             << " duration=" << fmt_double(scenes[i].duration_s) << " script=" << stem
             << ".script audio=" << stem << ".pcm caption=" << scenes[i].caption << "\n";
  }
  write_file_atomic(dir / "manifest", manifest.str());
}

inline Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.dir = dir;
  const std::string text = read_text_file(dir / "manifest");
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "vta-dataset v1")
    throw DataError("dataset manifest " + dir.string() + ": bad header");
  auto kv = [&](const std::string& key) {
    if (!std::getline(in, line))
      throw DataError("dataset manifest " + dir.string() + ": truncated header");
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)) != key)
      throw DataError("dataset manifest " + dir.string() + ": expected '" + key + "'");
    return trim(line.substr(eq + 1));
  };
  ds.sample_rate_hz = static_cast<int>(parse_long(kv("sample_rate_hz"), "manifest"));
  ds.fps = static_cast<int>(parse_long(kv("fps"), "manifest"));
  const long count = parse_long(kv("count"), "manifest");
  for (long i = 0; i < count; ++i) {
    if (!std::getline(in, line))
      throw DataError("dataset manifest " + dir.string() + ": truncated at record " +
                      std::to_string(i));
    const auto toks = split_ws(line);
    if (toks.size() < 6 || toks[0] != "scene")
      throw DataError("dataset manifest " + dir.string() + ": bad record " +
                      std::to_string(i));
    std::string script_rel, audio_rel;
    for (const auto& tok : toks) {
      if (tok.rfind("script=", 0) == 0) script_rel = tok.substr(7);
      if (tok.rfind("audio=", 0) == 0) audio_rel = tok.substr(6);
    }
    if (script_rel.empty() || audio_rel.empty())
      throw DataError("dataset manifest " + dir.string() + ": record " +
                      std::to_string(i) + " missing paths");
    SceneScript s = parse_script(read_text_file(dir / script_rel),
                                 "record " + std::to_string(i) + " (" + script_rel + ")");
    ds.scenes.push_back(std::move(s));
    ds.audio_paths.push_back(audio_rel);
  }
  return ds;
}

inline std::vector<double> load_scene_audio(const Dataset& ds, std::size_t index) {
  require(index < ds.scenes.size(), "dataset: scene index out of range");
  return read_pcm(ds.dir / ds.audio_paths[index]);
}

}  // namespace vta
