#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "objguide/geom.hpp"
#include "objguide/guided.hpp"
#include "objguide/objmatch.hpp"
#include "objguide/pipeline.hpp"
#include "objguide/rectify.hpp"
#include "objguide/vanishing.hpp"

// Plain-text record formats: one record per line, whitespace separated,
// ASCII, '.' decimal point, LF line endings. Reals are written in the
// shortest form that parses back to the same double. Readers throw
// Error(kParse) with a "source:line: message" diagnostic.
namespace objguide::io {

std::string format_real(double v);

// A homography tagged with a plane id: rectifiers and planted plane maps.
struct PlaneHomography {
  int plane_id = 0;
  Homography h;

  bool operator==(const PlaneHomography&) const = default;
};

struct GroupRecord {
  int group_id = 0;
  Homography h;
  std::vector<BoxPair> pairs;

  bool operator==(const GroupRecord&) const = default;
};

// Serialized view of a group: the final (refined) homography and its pairs.
std::vector<GroupRecord> group_records(std::span<const ObjectGroup> groups);
// Inverse for downstream consumers; hypothesis := h, refined := false.
std::vector<ObjectGroup> to_groups(std::span<const GroupRecord> records);

// A feature-level truth record per image-1 feature (by line order).
struct FeatureTruthRecord {
  int plane = -1;
  int counterpart = -1;  // -1: none
  std::optional<Vec2> position2;

  bool operator==(const FeatureTruthRecord&) const = default;
};

// image.txt: W H
std::string write_image_size(const ImageSize& size);
ImageSize read_image_size(std::string_view text, std::string_view source = "image.txt");

// segments.txt: x1 y1 x2 y2
std::string write_segments(std::span<const LineSegment> segments);
std::vector<LineSegment> read_segments(std::string_view text,
                                       std::string_view source = "segments.txt");

// boxes.txt: xmin ymin xmax ymax score
std::string write_boxes(std::span<const DetBox> boxes);
std::vector<DetBox> read_boxes(std::string_view text, std::string_view source = "boxes.txt");

// quads.txt: x_tl y_tl x_tr y_tr x_br y_br x_bl y_bl score frame_tag
// frame_tag is "original" or "rect:<plane_id>".
std::string write_quads(std::span<const TaggedQuad> quads);
std::string write_quads(std::span<const QuadBox> quads);  // all original
std::vector<TaggedQuad> read_quads(std::string_view text, std::string_view source = "quads.txt");

// features.txt: "D <dim>" header, then x y d1 .. dD. Feature ids are the
// 0-based record order; write_features requires ids to follow that order.
std::string write_features(std::span<const Feature> features, int dim);
std::vector<Feature> read_features(std::string_view text,
                                   std::string_view source = "features.txt");

// matches.txt: i j sim group_id
std::string write_matches(std::span<const Match> matches);
std::vector<Match> read_matches(std::string_view text, std::string_view source = "matches.txt");

// groups.txt: group_id h11 .. h33 npairs, then npairs lines "i j"
std::string write_groups(std::span<const GroupRecord> groups);
std::vector<GroupRecord> read_groups(std::string_view text,
                                     std::string_view source = "groups.txt");

// rectifiers.txt / planes.txt: plane_id h11 .. h33
std::string write_plane_homographies(std::span<const PlaneHomography> hs);
std::vector<PlaneHomography> read_plane_homographies(std::string_view text,
                                                     std::string_view source = "rectifiers.txt");

// vps.txt: vx vy vw orientation n id_1 .. id_n
// orientation is "vertical", "horizontal" or "unknown".
std::string write_vps(std::span<const VanishingPoint> vps);
std::vector<VanishingPoint> read_vps(std::string_view text, std::string_view source = "vps.txt");

// columns.txt: lo hi plane_id
std::string write_columns(std::span<const ColumnInterval> columns);
std::vector<ColumnInterval> read_columns(std::string_view text,
                                         std::string_view source = "columns.txt");

// box_pairs.txt: i j
std::string write_box_pairs(std::span<const BoxPair> pairs);
std::vector<BoxPair> read_box_pairs(std::string_view text,
                                    std::string_view source = "box_pairs.txt");

// feature_truth.txt: plane counterpart [x2 y2]
std::string write_feature_truth(std::span<const FeatureTruthRecord> truth);
std::vector<FeatureTruthRecord> read_feature_truth(std::string_view text,
                                                   std::string_view source = "feature_truth.txt");

// Whole-file helpers. read_file throws kParse when the file is missing or
// unreadable.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// An image directory holds image.txt, segments.txt, boxes.txt and
// features.txt, plus an optional quads.txt.
ImageInputs read_image_dir(const std::filesystem::path& dir);
void write_image_dir(const std::filesystem::path& dir, const ImageInputs& in);

}  // namespace objguide::io
