#include "dreampipe/protocol.hpp"

#include <sodium.h>

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "dreampipe/image_io.hpp"

namespace dreampipe {
namespace {

using nlohmann::json;

json payload_to_json(const ImagePayload& p) {
  return json{{"format", p.format}, {"data", base64_encode(p.bytes)}};
}

ImagePayload payload_from_json(const json& j) {
  require(j.is_object() && j.contains("format") && j.contains("data"), ErrorKind::Format,
          "image payload needs format and data");
  ImagePayload p;
  p.format = j.at("format").get<std::string>();
  p.bytes = base64_decode(j.at("data").get<std::string>());
  return p;
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string(what) + ": " + e.what());
  }
}

void check_protocol(const json& j) {
  require(j.is_object(), ErrorKind::Format, "protocol document must be a JSON object");
  if (j.contains("protocol"))
    require(j.at("protocol") == kProtocolVersion, ErrorKind::Format,
            "unsupported protocol version " + j.at("protocol").dump());
}

}  // namespace

const char* to_string(StylizeKind kind) noexcept {
  switch (kind) {
    case StylizeKind::Generate: return "generate";
    case StylizeKind::Align: return "align";
    case StylizeKind::Inpaint: return "inpaint";
    case StylizeKind::Upscale: return "upscale";
  }
  return "?";
}

StylizeKind parse_kind(const std::string& text) {
  for (StylizeKind k : {StylizeKind::Generate, StylizeKind::Align, StylizeKind::Inpaint,
                        StylizeKind::Upscale})
    if (text == to_string(k)) return k;
  fail(ErrorKind::Format, "unknown stylize kind '" + text + "'");
}

ImagePayload ImagePayload::from_image(const Image8& image) { return {"png", encode_png(image)}; }
ImagePayload ImagePayload::from_field(const ImageF& field) { return {"pfm", encode_pfm(field)}; }

Image8 ImagePayload::decode_image() const {
  require(format == "png", ErrorKind::Contract, "expected a png payload, got '" + format + "'");
  return decode_png(bytes);
}

ImageF ImagePayload::decode_field() const {
  if (format == "pfm") return decode_pfm(bytes);
  if (format == "png") {
    const Image8 img = decode_png(bytes);
    require(img.channels() == 1, ErrorKind::Contract, "png field payload must be grayscale");
    return to_float(img);
  }
  fail(ErrorKind::Contract, "unknown payload format '" + format + "'");
}

std::array<int, 2> ImagePayload::dimensions() const {
  if (format == "png") {
    const Image8 img = decode_png(bytes);
    return {img.width(), img.height()};
  }
  const ImageF f = decode_field();
  return {f.width(), f.height()};
}

const ImagePayload& StylizeRequest::payload(const std::string& name) const {
  auto it = images.find(name);
  require(it != images.end(), ErrorKind::Contract,
          std::string(to_string(kind)) + " request lacks image slot '" + name + "'");
  return it->second;
}

bool BackendErrorInfo::transient() const noexcept {
  return code == "unavailable" || code == "timeout" || code == "overloaded";
}

std::vector<std::string> required_slots(StylizeKind kind) {
  switch (kind) {
    case StylizeKind::Generate: return {slot::kDistance, slot::kSoftedgeSource};
    case StylizeKind::Align: return {slot::kCannySource, slot::kTileSource};
    case StylizeKind::Inpaint: return {slot::kPartialImage, slot::kDistance, slot::kMask};
    case StylizeKind::Upscale: return {slot::kImage};
  }
  return {};
}

namespace {

const char* reference_slot(StylizeKind kind) {
  switch (kind) {
    case StylizeKind::Generate: return slot::kDistance;
    case StylizeKind::Align: return slot::kTileSource;
    case StylizeKind::Inpaint: return slot::kPartialImage;
    case StylizeKind::Upscale: return slot::kImage;
  }
  return slot::kImage;
}

}  // namespace

void validate_request(const StylizeRequest& request) {
  const Directives& d = request.directives;
  require(d.circular_padding_fraction >= 0.0 && d.circular_padding_fraction <= 1.0,
          ErrorKind::Contract, "circular_padding_fraction must lie in [0, 1]");
  require(d.upscale_factor >= 1 && d.upscale_factor <= 8, ErrorKind::Contract,
          "upscale_factor must lie in [1, 8]");
  require(d.denoise_strength >= 0.0 && d.denoise_strength <= 1.0, ErrorKind::Contract,
          "denoise_strength must lie in [0, 1]");
  for (const auto& name : required_slots(request.kind)) request.payload(name);
  std::optional<std::array<int, 2>> dims;
  for (const auto& [name, p] : request.images) {
    require(p.format == "png" || p.format == "pfm", ErrorKind::Contract,
            "slot '" + name + "' has unknown format '" + p.format + "'");
    const auto here = p.dimensions();
    if (!dims) dims = here;
    require(*dims == here, ErrorKind::Contract,
            "image slots of one request must share dimensions; '" + name + "' differs");
  }
}

std::array<int, 2> expected_response_size(const StylizeRequest& request) {
  auto dims = request.payload(reference_slot(request.kind)).dimensions();
  if (request.kind == StylizeKind::Upscale) {
    dims[0] *= request.directives.upscale_factor;
    dims[1] *= request.directives.upscale_factor;
  }
  return dims;
}

void validate_response(const StylizeRequest& request, const StylizeResponse& response) {
  const Image8 img = response.image.decode_image();
  const auto want = expected_response_size(request);
  require(img.width() == want[0] && img.height() == want[1], ErrorKind::Contract,
          std::string(to_string(request.kind)) + " response is " + std::to_string(img.width()) +
              "x" + std::to_string(img.height()) + ", expected " + std::to_string(want[0]) + "x" +
              std::to_string(want[1]));
  require(img.channels() == 3, ErrorKind::Contract, "response image must be RGB");
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  const std::size_t len = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);  // drop the terminator
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), "\r\n", &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0)
    fail(ErrorKind::Format, "invalid base64 payload");
  out.resize(len);
  return out;
}

std::string serialize_request(const StylizeRequest& r) {
  json images = json::object();
  for (const auto& [name, p] : r.images) images[name] = payload_to_json(p);
  const json j{{"protocol", kProtocolVersion},
               {"kind", to_string(r.kind)},
               {"prompt", r.prompt},
               {"seed", r.seed},
               {"directives",
                {{"circular_padding_fraction", r.directives.circular_padding_fraction},
                 {"upscale_factor", r.directives.upscale_factor},
                 {"denoise_strength", r.directives.denoise_strength}}},
               {"images", images}};
  return j.dump();
}

StylizeRequest parse_request(const std::string& text) {
  const json j = parse_json(text, "request");
  check_protocol(j);
  StylizeRequest r;
  try {
    r.kind = parse_kind(j.at("kind").get<std::string>());
    r.prompt = j.value("prompt", std::string{});
    require(j.contains("seed") && j.at("seed").is_number_integer(), ErrorKind::Format,
            "request must carry an integer seed");
    r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("directives")) {
      const json& d = j.at("directives");
      r.directives.circular_padding_fraction =
          d.value("circular_padding_fraction", r.directives.circular_padding_fraction);
      r.directives.upscale_factor = d.value("upscale_factor", r.directives.upscale_factor);
      r.directives.denoise_strength = d.value("denoise_strength", r.directives.denoise_strength);
    }
    if (j.contains("images"))
      for (const auto& [name, p] : j.at("images").items()) r.images[name] = payload_from_json(p);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed request: ") + e.what());
  }
  return r;
}

std::string serialize_response(const StylizeResponse& r) {
  const json j{{"protocol", kProtocolVersion},
               {"image", payload_to_json(r.image)},
               {"metadata",
                {{"model_id", r.metadata.model_id},
                 {"seed", r.metadata.seed},
                 {"wall_time_ms", r.metadata.wall_time_ms}}}};
  return j.dump();
}

std::string serialize_error(const BackendErrorInfo& e) {
  const json j{{"protocol", kProtocolVersion},
               {"error", {{"code", e.code}, {"message", e.message}}}};
  return j.dump();
}

ParsedReply parse_reply(const std::string& text) {
  const json j = parse_json(text, "reply");
  check_protocol(j);
  ParsedReply out;
  try {
    if (j.contains("error")) {
      const json& e = j.at("error");
      out.error = BackendErrorInfo{e.value("code", std::string("unknown")),
                                   e.value("message", std::string{})};
      return out;
    }
    StylizeResponse r;
    r.image = payload_from_json(j.at("image"));
    if (j.contains("metadata")) {
      const json& m = j.at("metadata");
      r.metadata.model_id = m.value("model_id", std::string{});
      r.metadata.seed = m.value("seed", std::uint64_t{0});
      r.metadata.wall_time_ms = m.value("wall_time_ms", 0.0);
    }
    out.response = std::move(r);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed reply: ") + e.what());
  }
  return out;
}

}  // namespace dreampipe
