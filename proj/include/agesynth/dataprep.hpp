#pragma once

#include <array>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agesynth/image_io.hpp"
#include "agesynth/trainer.hpp"

namespace agesynth {

enum class Glasses { none, normal, dark };
const char* to_string(Glasses g);
Glasses parse_glasses(const std::string& text);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// The ten labelled age clusters, youngest first.
const std::vector<std::string>& age_cluster_labels();

/// e_l, e_r, m_l, m_r in image pixel coordinates.
struct Landmarks {
  Point eye_left, eye_right, mouth_left, mouth_right;
};

struct DatasetRecord {
  int image_id = 0;
  std::string age_cluster;
  double age_confidence = 1.0;
  Gender gender = Gender::male;
  double gender_confidence = 1.0;
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
  Glasses glasses = Glasses::none;
  double eye_occlusion_left = 0.0;
  double eye_occlusion_right = 0.0;
  std::optional<Landmarks> landmarks;
  std::string image_path;
  std::string mask_path;

  /// Throws DataError naming the first offending field.
  void validate() const;
};

/// Label file: a "# agesynth-labels v1" header, then one record per line as
/// whitespace-separated key=value pairs. Keys: id, age_cluster, age_conf,
/// gender, gender_conf, yaw, pitch, glasses, occ_left, occ_right, e_l, e_r,
/// m_l, m_r (each "x,y"), image, mask. Blank lines and '#' lines are skipped.
std::vector<DatasetRecord> parse_labels(std::istream& in,
                                        const std::string& source = "labels");
std::vector<DatasetRecord> read_label_file(const std::string& path);
void write_label_file(const std::string& path,
                      const std::vector<DatasetRecord>& records);

/// Reads the released FFHQ-Aging CSV (image_number, age_group,
/// age_group_confidence, gender, gender_confidence, head_pitch, head_roll,
/// head_yaw, left_eye_occluded, right_eye_occluded, glasses). Columns are
/// located by header name. No landmarks or paths are filled in.
std::vector<DatasetRecord> import_ffhq_aging_csv(const std::string& path);

/// Oriented square crop region. Corners run c-x-y, c-x+y, c+x+y, c+x-y.
struct AlignmentBox {
  Point center;
  Point x;  // half-side vector along the eye axis
  Point y;  // Rotate90(x)
  std::array<Point, 4> corners;
  double side() const;
};

AlignmentBox compute_alignment_box(const Landmarks& lm);
/// Box covering a whole size x size image, for inputs that are already aligned.
AlignmentBox full_frame_box(int size);

struct CropOptions {
  /// Width of the ramp that fades mirrored padding into the clamped edge
  /// colour, as a fraction of the box side.
  double ramp_fraction = 0.1;
};

/// Resamples the box onto an out_resolution square. Samples outside the
/// image come from mirror padding blended toward the nearest edge pixel.
/// Downscaling supersamples so every source pixel contributes.
Tensor crop_and_resize(const Tensor& image, const AlignmentBox& box,
                       int out_resolution, const CropOptions& options = {});

struct PruneThresholds {
  double min_gender_confidence = 0.66;
  double min_age_confidence = 0.6;
  double max_abs_yaw = 40.0;
  double max_abs_pitch = 30.0;
  bool reject_dark_glasses = true;
  double max_single_eye_occlusion = 90.0;
  double max_both_eye_occlusion = 50.0;
};

enum class PruneReason {
  gender_confidence,
  age_confidence,
  yaw,
  pitch,
  dark_glasses,
  eye_occlusion_single,
  eye_occlusion_both,
};
const char* to_string(PruneReason r);

struct PruneResult {
  bool keep = true;
  std::vector<PruneReason> reasons;
};

PruneResult prune_record(const DatasetRecord& r,
                         const PruneThresholds& thresholds = {});

/// Semantic label palette: id -> name, plus which ids are erased.
struct SemanticPalette {
  std::vector<std::string> names;
  std::set<int> removed;
};

/// The 19-label face parsing palette; background (0) and cloth (18) removed.
const SemanticPalette& face_parsing_palette();
/// Palette file: "# agesynth-palette v1", then "id name keep|remove" lines.
SemanticPalette read_palette(const std::string& path);

/// Sets pixels whose label is in palette.removed to `fill`.
Tensor mask_background(const Tensor& image, const LabelImage& mask,
                       const SemanticPalette& palette = face_parsing_palette(),
                       double fill = -1.0);

struct ManifestEntry {
  int image_id = 0;
  Gender gender = Gender::male;
  std::string class_label;
  std::string image_path;
  std::string mask_path;
};

using Manifest = std::vector<ManifestEntry>;

struct ManifestSet {
  Manifest train;
  Manifest test;
  /// (gender, class label) -> training images.
  std::map<std::pair<std::string, std::string>, int> train_counts;
  std::map<std::pair<std::string, std::string>, int> test_counts;
  int total = 0;
  int kept = 0;
  int pruned = 0;
  std::map<std::string, int> reason_counts;

  /// Human-readable per-class count table.
  std::string count_table(const AgeClassSchema& schema) const;
};

inline constexpr int kDefaultSplitBoundary = 69000;

/// Keeps unpruned anchor-cluster records, split by id. Throws ManifestError
/// naming any (gender, class) left empty in the training split.
ManifestSet build_manifest(const std::vector<DatasetRecord>& records,
                           const AgeClassSchema& schema,
                           int split_boundary = kDefaultSplitBoundary,
                           const PruneThresholds& thresholds = {});

/// "# agesynth-manifest v1" header, then tab-separated id, gender, class,
/// image path, mask path ("-" when absent).
void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

/// Loads one gender's entries; relative image paths resolve against the
/// manifest's directory. Images load lazily.
ClassDataset dataset_from_manifest(const std::string& manifest_path,
                                   const AgeClassSchema& schema, Gender gender);

}  // namespace agesynth
