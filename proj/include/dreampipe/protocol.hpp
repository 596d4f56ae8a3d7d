#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dreampipe/image.hpp"

namespace dreampipe {

inline constexpr const char* kProtocolVersion = "dreampipe-stylize/1";

enum class StylizeKind { Generate, Align, Inpaint, Upscale };

const char* to_string(StylizeKind kind) noexcept;
StylizeKind parse_kind(const std::string& text);

// Slot names used in request image maps.
namespace slot {
inline constexpr const char* kDistance = "distance";
inline constexpr const char* kSoftedgeSource = "softedge_source";
inline constexpr const char* kCannySource = "canny_source";
inline constexpr const char* kTileSource = "tile_source";
inline constexpr const char* kPartialImage = "partial_image";
inline constexpr const char* kMask = "mask";
inline constexpr const char* kImage = "image";
}  // namespace slot

struct ImagePayload {
  std::string format;  // "png" or "pfm"
  std::vector<std::uint8_t> bytes;

  static ImagePayload from_image(const Image8& image);
  static ImagePayload from_field(const ImageF& field);
  Image8 decode_image() const;  // png only
  ImageF decode_field() const;  // pfm, or png rescaled to [0,1]
  std::array<int, 2> dimensions() const;

  friend bool operator==(const ImagePayload&, const ImagePayload&) = default;
};

struct Directives {
  double circular_padding_fraction = 0.6;
  int upscale_factor = 3;
  double denoise_strength = 1.0;

  friend bool operator==(const Directives&, const Directives&) = default;
};

struct StylizeRequest {
  StylizeKind kind = StylizeKind::Generate;
  std::string prompt;
  std::uint64_t seed = 0;
  Directives directives;
  std::map<std::string, ImagePayload> images;

  void set_image(const std::string& name, const Image8& image) {
    images[name] = ImagePayload::from_image(image);
  }
  void set_field(const std::string& name, const ImageF& field) {
    images[name] = ImagePayload::from_field(field);
  }
  const ImagePayload& payload(const std::string& name) const;
  bool has(const std::string& name) const { return images.count(name) != 0; }

  friend bool operator==(const StylizeRequest&, const StylizeRequest&) = default;
};

struct ResponseMetadata {
  std::string model_id;
  std::uint64_t seed = 0;
  double wall_time_ms = 0.0;

  friend bool operator==(const ResponseMetadata&, const ResponseMetadata&) = default;
};

struct StylizeResponse {
  ImagePayload image;
  ResponseMetadata metadata;

  friend bool operator==(const StylizeResponse&, const StylizeResponse&) = default;
};

// Error document from a backend. Codes "unavailable", "timeout" and
// "overloaded" are transient and may be retried.
struct BackendErrorInfo {
  std::string code;
  std::string message;
  bool transient() const noexcept;
};

std::vector<std::string> required_slots(StylizeKind kind);

// Throws Contract on missing slots, bad formats, mismatched sizes or
// out-of-range directives.
void validate_request(const StylizeRequest& request);
// Output dimensions the response must have.
std::array<int, 2> expected_response_size(const StylizeRequest& request);
// Throws Contract when the image is not RGB of the expected size.
void validate_response(const StylizeRequest& request, const StylizeResponse& response);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::string serialize_request(const StylizeRequest& request);
StylizeRequest parse_request(const std::string& text);

std::string serialize_response(const StylizeResponse& response);
std::string serialize_error(const BackendErrorInfo& error);
// Either a response or a backend error document; Format errors on garbage.
struct ParsedReply {
  std::optional<StylizeResponse> response;
  std::optional<BackendErrorInfo> error;
};
ParsedReply parse_reply(const std::string& text);

}  // namespace dreampipe
