#include "agesynth/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "agesynth/errors.hpp"

namespace agesynth {

namespace {

namespace fs = std::filesystem;

constexpr const char* kLabelHeader = "# agesynth-labels v1";
constexpr const char* kManifestHeader = "# agesynth-manifest v1";
constexpr const char* kPaletteHeader = "# agesynth-palette v1";

Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
double norm(Point a) { return std::hypot(a.x, a.y); }
Point rotate90(Point a) { return {-a.y, a.x}; }

double parse_double(const std::string& text, const std::string& key,
                    const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": field '" + key + "' is not a number: '" + text +
                    "'");
  }
}

Point parse_point(const std::string& text, const std::string& key,
                  const std::string& where) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw DataError(where + ": field '" + key + "' must be 'x,y'");
  }
  return {parse_double(text.substr(0, comma), key, where),
          parse_double(text.substr(comma + 1), key, where)};
}

std::string format_point(Point p) {
  std::ostringstream os;
  os.precision(17);
  os << p.x << ',' << p.y;
  return os.str();
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  out.push_back(field);
  return out;
}

// Reflects t into [0, size) as an endlessly mirrored signal.
double mirror(double t, int size) {
  const double period = 2.0 * size;
  double m = std::fmod(t, period);
  if (m < 0) m += period;
  return m < size ? m : period - m;
}

// Bilinear sample at continuous pixel coordinates (pixel i centred at
// i + 0.5); coordinates must lie in [0, size].
void bilinear(const Tensor& img, double px, double py, double* out) {
  const Shape s = img.shape();
  const double fx = std::clamp(px - 0.5, 0.0, s.w - 1.0);
  const double fy = std::clamp(py - 0.5, 0.0, s.h - 1.0);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, s.w - 1);
  const int y1 = std::min(y0 + 1, s.h - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  for (int c = 0; c < s.c; ++c) {
    const double top = (1 - ax) * img.at(0, y0, x0, c) + ax * img.at(0, y0, x1, c);
    const double bot = (1 - ax) * img.at(0, y1, x0, c) + ax * img.at(0, y1, x1, c);
    out[c] = (1 - ay) * top + ay * bot;
  }
}

}  // namespace

const char* to_string(Glasses g) {
  switch (g) {
    case Glasses::none: return "none";
    case Glasses::normal: return "normal";
    case Glasses::dark: return "dark";
  }
  return "none";
}

Glasses parse_glasses(const std::string& text) {
  const std::string t = lower(text);
  if (t == "none" || t == "noglasses") return Glasses::none;
  if (t == "normal" || t == "normalglasses") return Glasses::normal;
  if (t == "dark" || t == "dark glasses" || t == "sunglasses") {
    return Glasses::dark;
  }
  throw DataError("unknown glasses label '" + text + "'");
}

const std::vector<std::string>& age_cluster_labels() {
  static const std::vector<std::string> labels{
      "0-2",   "3-6",   "7-9",   "10-14", "15-19",
      "20-29", "30-39", "40-49", "50-69", "70+"};
  return labels;
}

void DatasetRecord::validate() const {
  const std::string where = "record " + std::to_string(image_id);
  if (image_id < 0) throw DataError(where + ": id must be >= 0");
  const auto& clusters = age_cluster_labels();
  if (std::find(clusters.begin(), clusters.end(), age_cluster) ==
      clusters.end()) {
    throw DataError(where + ": unknown age cluster '" + age_cluster + "'");
  }
  auto unit = [&](double v, const char* field) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError(where + ": " + field + " must lie in [0, 1]");
    }
  };
  unit(age_confidence, "age_conf");
  unit(gender_confidence, "gender_conf");
  auto percent = [&](double v, const char* field) {
    if (!(v >= 0.0 && v <= 100.0)) {
      throw DataError(where + ": " + field + " must lie in [0, 100]");
    }
  };
  percent(eye_occlusion_left, "occ_left");
  percent(eye_occlusion_right, "occ_right");
  if (!std::isfinite(yaw_deg) || !std::isfinite(pitch_deg)) {
    throw DataError(where + ": pose angles must be finite");
  }
  if (landmarks) {
    for (const Point& p : {landmarks->eye_left, landmarks->eye_right,
                           landmarks->mouth_left, landmarks->mouth_right}) {
      if (!(p.x >= 0 && p.y >= 0) || !std::isfinite(p.x) ||
          !std::isfinite(p.y)) {
        throw DataError(where + ": landmark outside the image");
      }
    }
  }
}

std::vector<DatasetRecord> parse_labels(std::istream& in,
                                        const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kLabelHeader, 0) != 0) {
    throw DataError(source + ": missing '" + kLabelHeader + "' header");
  }
  std::vector<DatasetRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::string where = source + ":" + std::to_string(line_no);
    std::istringstream fields(line);
    std::map<std::string, std::string> kv;
    std::string token;
    while (fields >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) {
        throw DataError(where + ": expected key=value, got '" + token + "'");
      }
      kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
    if (kv.empty()) continue;
    auto take = [&](const std::string& key) -> std::optional<std::string> {
      auto it = kv.find(key);
      if (it == kv.end()) return std::nullopt;
      std::string v = it->second;
      kv.erase(it);
      return v;
    };
    auto need = [&](const std::string& key) {
      auto v = take(key);
      if (!v) throw DataError(where + ": missing field '" + key + "'");
      return *v;
    };
    DatasetRecord r;
    r.image_id = static_cast<int>(parse_double(need("id"), "id", where));
    r.age_cluster = need("age_cluster");
    r.age_confidence = parse_double(need("age_conf"), "age_conf", where);
    try {
      r.gender = parse_gender(need("gender"));
    } catch (const ConfigError& e) {
      throw DataError(where + ": " + e.what());
    }
    r.gender_confidence = parse_double(need("gender_conf"), "gender_conf", where);
    r.yaw_deg = parse_double(need("yaw"), "yaw", where);
    r.pitch_deg = parse_double(need("pitch"), "pitch", where);
    r.glasses = parse_glasses(need("glasses"));
    r.eye_occlusion_left = parse_double(need("occ_left"), "occ_left", where);
    r.eye_occlusion_right = parse_double(need("occ_right"), "occ_right", where);
    const auto el = take("e_l"), er = take("e_r"), ml = take("m_l"),
               mr = take("m_r");
    const int present = el.has_value() + er.has_value() + ml.has_value() +
                        mr.has_value();
    if (present == 4) {
      r.landmarks = Landmarks{parse_point(*el, "e_l", where),
                              parse_point(*er, "e_r", where),
                              parse_point(*ml, "m_l", where),
                              parse_point(*mr, "m_r", where)};
    } else if (present != 0) {
      throw DataError(where + ": landmarks need all of e_l, e_r, m_l, m_r");
    }
    r.image_path = take("image").value_or("");
    r.mask_path = take("mask").value_or("");
    if (!kv.empty()) {
      throw DataError(where + ": unknown field '" + kv.begin()->first + "'");
    }
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DatasetRecord> read_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file '" + path + "'");
  return parse_labels(in, path);
}

void write_label_file(const std::string& path,
                      const std::vector<DatasetRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write label file '" + path + "'");
  out.precision(17);
  out << kLabelHeader << '\n';
  for (const auto& r : records) {
    out << "id=" << r.image_id << " age_cluster=" << r.age_cluster
        << " age_conf=" << r.age_confidence << " gender=" << to_string(r.gender)
        << " gender_conf=" << r.gender_confidence << " yaw=" << r.yaw_deg
        << " pitch=" << r.pitch_deg << " glasses=" << to_string(r.glasses)
        << " occ_left=" << r.eye_occlusion_left
        << " occ_right=" << r.eye_occlusion_right;
    if (r.landmarks) {
      out << " e_l=" << format_point(r.landmarks->eye_left)
          << " e_r=" << format_point(r.landmarks->eye_right)
          << " m_l=" << format_point(r.landmarks->mouth_left)
          << " m_r=" << format_point(r.landmarks->mouth_right);
    }
    if (!r.image_path.empty()) out << " image=" << r.image_path;
    if (!r.mask_path.empty()) out << " mask=" << r.mask_path;
    out << '\n';
  }
}

std::vector<DatasetRecord> import_ffhq_aging_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label CSV '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty CSV");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[lower(header[i])] = i;
  const char* required[] = {"image_number",      "age_group",
                            "age_group_confidence", "gender",
                            "gender_confidence", "head_pitch",
                            "head_yaw",          "left_eye_occluded",
                            "right_eye_occluded", "glasses"};
  for (const char* name : required) {
    if (!col.count(name)) {
      throw DataError(path + ": CSV lacks column '" + std::string(name) + "'");
    }
  }
  std::vector<DatasetRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto f = split_csv_line(line);
    if (f.size() < header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) +
                      " columns");
    }
    auto field = [&](const char* name) { return f[col.at(name)]; };
    DatasetRecord r;
    r.image_id = static_cast<int>(parse_double(field("image_number"), "image_number", where));
    r.age_cluster = field("age_group");
    r.age_confidence = parse_double(field("age_group_confidence"), "age_group_confidence", where);
    try {
      r.gender = parse_gender(lower(field("gender")));
    } catch (const ConfigError& e) {
      throw DataError(where + ": " + e.what());
    }
    r.gender_confidence = parse_double(field("gender_confidence"), "gender_confidence", where);
    r.pitch_deg = parse_double(field("head_pitch"), "head_pitch", where);
    r.yaw_deg = parse_double(field("head_yaw"), "head_yaw", where);
    r.eye_occlusion_left = parse_double(field("left_eye_occluded"), "left_eye_occluded", where);
    r.eye_occlusion_right = parse_double(field("right_eye_occluded"), "right_eye_occluded", where);
    r.glasses = parse_glasses(field("glasses"));
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

// -- alignment ---------------------------------------------------------------

double AlignmentBox::side() const { return 2.0 * norm(x); }

AlignmentBox compute_alignment_box(const Landmarks& lm) {
  const Point eye_avg = 0.5 * (lm.eye_left + lm.eye_right);
  const Point mouth_avg = 0.5 * (lm.mouth_left + lm.mouth_right);
  const Point xp = lm.eye_right - lm.eye_left;
  const Point yp = mouth_avg - eye_avg;
  if (norm(xp) == 0.0) {
    throw GeometryError("degenerate landmarks: the eyes coincide");
  }
  const Point dir = xp - rotate90(yp);
  if (norm(dir) == 0.0) {
    throw GeometryError("degenerate landmarks: no crop orientation");
  }
  AlignmentBox box;
  box.center = eye_avg - 0.1 * yp;
  const double s = std::max(4.0 * norm(xp), 4.4 * norm(yp));
  box.x = (0.5 * s / norm(dir)) * dir;
  box.y = rotate90(box.x);
  const Point c = box.center;
  box.corners = {c - box.x - box.y, c - box.x + box.y, c + box.x + box.y,
                 c + box.x - box.y};
  return box;
}

AlignmentBox full_frame_box(int size) {
  if (size < 1) throw GeometryError("frame size must be >= 1");
  AlignmentBox box;
  const double h = 0.5 * size;
  box.center = {h, h};
  box.x = {h, 0.0};
  box.y = {0.0, h};
  box.corners = {Point{0, 0}, Point{0, 2 * h}, Point{2 * h, 2 * h}, Point{2 * h, 0}};
  return box;
}

Tensor crop_and_resize(const Tensor& image, const AlignmentBox& box,
                       int out_resolution, const CropOptions& options) {
  const Shape s = image.shape();
  if (s.n != 1) throw ShapeError("crop_and_resize takes one image");
  if (out_resolution < 1) throw ArgumentError("out_resolution must be >= 1");
  const double side = box.side();
  if (!(side > 0) || !std::isfinite(side)) {
    throw GeometryError("crop box has no extent");
  }
  double lo_x = box.corners[0].x, hi_x = lo_x, lo_y = box.corners[0].y,
         hi_y = lo_y;
  for (const Point& p : box.corners) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  if (hi_x <= 0 || hi_y <= 0 || lo_x >= s.w || lo_y >= s.h) {
    throw GeometryError("crop box lies entirely outside the image");
  }

  const double ramp = std::max(options.ramp_fraction * side, 1e-9);
  const int ss = std::max(1, static_cast<int>(std::ceil(side / out_resolution - 1e-9)));
  const Point origin = box.corners[0];
  const Point ex = (2.0 / out_resolution) * box.x;  // one output pixel along x
  const Point ey = (2.0 / out_resolution) * box.y;

  Tensor out(Shape{1, out_resolution, out_resolution, s.c});
  std::vector<double> acc(s.c), mirrored(s.c), edge(s.c);
  for (int v = 0; v < out_resolution; ++v)
    for (int u = 0; u < out_resolution; ++u) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const double fu = u + (sx + 0.5) / ss;
          const double fv = v + (sy + 0.5) / ss;
          const Point p = origin + fu * ex + fv * ey;
          const double over_x = std::max({0.0, -p.x, p.x - s.w});
          const double over_y = std::max({0.0, -p.y, p.y - s.h});
          const double overhang = std::max(over_x, over_y);
          if (overhang == 0.0) {
            bilinear(image, p.x, p.y, mirrored.data());
            for (int c = 0; c < s.c; ++c) acc[c] += mirrored[c];
            continue;
          }
          bilinear(image, mirror(p.x, s.w), mirror(p.y, s.h), mirrored.data());
          bilinear(image, std::clamp(p.x, 0.0, double(s.w)),
                   std::clamp(p.y, 0.0, double(s.h)), edge.data());
          const double w = std::min(1.0, overhang / ramp);
          for (int c = 0; c < s.c; ++c) {
            acc[c] += (1 - w) * mirrored[c] + w * edge[c];
          }
        }
      for (int c = 0; c < s.c; ++c) out.at(0, v, u, c) = acc[c] / (ss * ss);
    }
  return out;
}

// -- pruning -----------------------------------------------------------------

const char* to_string(PruneReason r) {
  switch (r) {
    case PruneReason::gender_confidence: return "gender_confidence";
    case PruneReason::age_confidence: return "age_confidence";
    case PruneReason::yaw: return "yaw";
    case PruneReason::pitch: return "pitch";
    case PruneReason::dark_glasses: return "dark_glasses";
    case PruneReason::eye_occlusion_single: return "eye_occlusion_single";
    case PruneReason::eye_occlusion_both: return "eye_occlusion_both";
  }
  return "unknown";
}

PruneResult prune_record(const DatasetRecord& r, const PruneThresholds& t) {
  PruneResult out;
  auto fire = [&](bool cond, PruneReason reason) {
    if (cond) out.reasons.push_back(reason);
  };
  fire(r.gender_confidence < t.min_gender_confidence,
       PruneReason::gender_confidence);
  fire(r.age_confidence < t.min_age_confidence, PruneReason::age_confidence);
  fire(std::abs(r.yaw_deg) > t.max_abs_yaw, PruneReason::yaw);
  fire(std::abs(r.pitch_deg) > t.max_abs_pitch, PruneReason::pitch);
  fire(t.reject_dark_glasses && r.glasses == Glasses::dark,
       PruneReason::dark_glasses);
  fire(std::max(r.eye_occlusion_left, r.eye_occlusion_right) >
           t.max_single_eye_occlusion,
       PruneReason::eye_occlusion_single);
  fire(std::min(r.eye_occlusion_left, r.eye_occlusion_right) >
           t.max_both_eye_occlusion,
       PruneReason::eye_occlusion_both);
  out.keep = out.reasons.empty();
  return out;
}

// -- semantic masks ----------------------------------------------------------

const SemanticPalette& face_parsing_palette() {
  static const SemanticPalette palette{
      {"background", "skin", "nose", "eye_g", "l_eye", "r_eye", "l_brow",
       "r_brow", "l_ear", "r_ear", "mouth", "u_lip", "l_lip", "hair", "hat",
       "ear_r", "neck_l", "neck", "cloth"},
      {0, 18}};
  return palette;
}

SemanticPalette read_palette(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open palette '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind(kPaletteHeader, 0) != 0) {
    throw DataError(path + ": missing '" + kPaletteHeader + "' header");
  }
  SemanticPalette p;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    int id = -1;
    std::string name, action;
    if (!(fields >> id >> name >> action) ||
        id != static_cast<int>(p.names.size()) ||
        (action != "keep" && action != "remove")) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected '<next id> <name> keep|remove'");
    }
    p.names.push_back(name);
    if (action == "remove") p.removed.insert(id);
  }
  if (p.names.empty()) throw DataError(path + ": empty palette");
  return p;
}

Tensor mask_background(const Tensor& image, const LabelImage& mask,
                       const SemanticPalette& palette, double fill) {
  const Shape s = image.shape();
  if (s.n != 1 || s.h != mask.height || s.w != mask.width) {
    throw ShapeError("mask " + std::to_string(mask.width) + "x" +
                     std::to_string(mask.height) + " does not match image " +
                     s.str());
  }
  Tensor out = image;
  const int labels = static_cast<int>(palette.names.size());
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) {
      const int label = mask.at(y, x);
      if (label >= labels) {
        throw DataError("mask label " + std::to_string(label) +
                        " is not in the palette");
      }
      if (palette.removed.count(label)) {
        for (int c = 0; c < s.c; ++c) out.at(0, y, x, c) = fill;
      }
    }
  return out;
}

// -- manifests ---------------------------------------------------------------

std::string ManifestSet::count_table(const AgeClassSchema& schema) const {
  std::ostringstream os;
  os << "class";
  for (const char* g : {"male", "female"}) os << '\t' << g << "_train";
  for (const char* g : {"male", "female"}) os << '\t' << g << "_test";
  os << '\n';
  auto get = [](const auto& m, const std::string& g, const std::string& c) {
    auto it = m.find({g, c});
    return it == m.end() ? 0 : it->second;
  };
  for (const auto& cls : schema.classes()) {
    os << cls.label;
    for (const char* g : {"male", "female"}) os << '\t' << get(train_counts, g, cls.label);
    for (const char* g : {"male", "female"}) os << '\t' << get(test_counts, g, cls.label);
    os << '\n';
  }
  os << "total\t" << total << "\tkept\t" << kept << "\tpruned\t" << pruned
     << '\n';
  return os.str();
}

ManifestSet build_manifest(const std::vector<DatasetRecord>& records,
                           const AgeClassSchema& schema, int split_boundary,
                           const PruneThresholds& thresholds) {
  ManifestSet m;
  std::set<std::string> genders_seen;
  for (const auto& r : records) {
    ++m.total;
    const PruneResult verdict = prune_record(r, thresholds);
    if (!verdict.keep) {
      ++m.pruned;
      for (PruneReason reason : verdict.reasons) ++m.reason_counts[to_string(reason)];
      continue;
    }
    ++m.kept;
    if (!schema.find(r.age_cluster)) continue;
    const std::string g = to_string(r.gender);
    ManifestEntry e{r.image_id, r.gender, r.age_cluster, r.image_path,
                    r.mask_path};
    if (r.image_id < split_boundary) {
      genders_seen.insert(g);
      ++m.train_counts[{g, r.age_cluster}];
      m.train.push_back(std::move(e));
    } else {
      ++m.test_counts[{g, r.age_cluster}];
      m.test.push_back(std::move(e));
    }
  }
  for (const auto& g : genders_seen) {
    for (const auto& cls : schema.classes()) {
      if (!m.train_counts.count({g, cls.label})) {
        throw ManifestError("no " + g + " training images left in class '" +
                            cls.label + "' after pruning");
      }
    }
  }
  auto by_id = [](const ManifestEntry& a, const ManifestEntry& b) {
    return a.image_id < b.image_id;
  };
  std::stable_sort(m.train.begin(), m.train.end(), by_id);
  std::stable_sort(m.test.begin(), m.test.end(), by_id);
  return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw ManifestError("cannot write manifest '" + path + "'");
  out << kManifestHeader << '\n';
  for (const auto& e : manifest) {
    out << e.image_id << '\t' << to_string(e.gender) << '\t' << e.class_label
        << '\t' << (e.image_path.empty() ? "-" : e.image_path) << '\t'
        << (e.mask_path.empty() ? "-" : e.mask_path) << '\n';
  }
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind(kManifestHeader, 0) != 0) {
    throw ManifestError(path + ": missing '" + kManifestHeader + "' header");
  }
  Manifest m;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string id, gender, cls, image, mask;
    if (!std::getline(fields, id, '\t') || !std::getline(fields, gender, '\t') ||
        !std::getline(fields, cls, '\t') || !std::getline(fields, image, '\t') ||
        !std::getline(fields, mask)) {
      throw ManifestError(path + ":" + std::to_string(line_no) +
                          ": expected 5 tab-separated fields");
    }
    ManifestEntry e;
    try {
      e.image_id = std::stoi(id);
      e.gender = parse_gender(gender);
    } catch (const std::exception& ex) {
      throw ManifestError(path + ":" + std::to_string(line_no) + ": " +
                          ex.what());
    }
    e.class_label = cls;
    e.image_path = image == "-" ? "" : image;
    e.mask_path = mask == "-" ? "" : mask;
    m.push_back(std::move(e));
  }
  return m;
}

ClassDataset dataset_from_manifest(const std::string& manifest_path,
                                   const AgeClassSchema& schema,
                                   Gender gender) {
  const Manifest m = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  ClassDataset data(schema.n());
  for (const auto& e : m) {
    if (e.gender != gender) continue;
    const auto cls = schema.find(e.class_label);
    if (!cls) continue;
    if (e.image_path.empty()) {
      throw ManifestError("manifest entry " + std::to_string(e.image_id) +
                          " has no image path");
    }
    fs::path p(e.image_path);
    if (p.is_relative()) p = base / p;
    data.add_path(*cls, p.string());
  }
  for (int c = 0; c < schema.n(); ++c) {
    if (data.size(c) == 0) {
      throw ManifestError(std::string("manifest has no ") + to_string(gender) +
                          " images for class '" + schema[c].label + "'");
    }
  }
  return data;
}

}  // namespace agesynth
