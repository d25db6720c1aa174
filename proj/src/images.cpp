// Copyright 2026 The Metablend Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <zlib.h>

#include <cstdint>

#include "metablend/error.hpp"
#include "metablend/oracle.hpp"

namespace metablend {

namespace fs = std::filesystem;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void put_chunk(std::string& out, const char type[4], const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                   static_cast<uInt>(body.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

std::string encode_png_rgb(int width, int height, const std::string& rgb) {
  std::string raw;
  raw.reserve(static_cast<size_t>(height) * (1 + 3 * width));
  for (int y = 0; y < height; ++y) {
    raw.push_back('\0');  // filter: none
    raw.append(rgb, static_cast<size_t>(y) * 3 * width, static_cast<size_t>(3 * width));
  }
  uLongf cap = compressBound(static_cast<uLong>(raw.size()));
  std::string compressed(cap, '\0');
  if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &cap,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                Z_BEST_COMPRESSION) != Z_OK) {
    throw Error(ErrorCode::kInternal, "zlib compression failed");
  }
  compressed.resize(cap);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB
  put_chunk(png, "IHDR", ihdr);
  put_chunk(png, "IDAT", compressed);
  put_chunk(png, "IEND", "");
  return png;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  return c - 'a' + 10;
}

}  // namespace

std::string placeholder_png(const std::string& prompt) {
  constexpr int kSize = 64;
  std::string h = sha256_hex(prompt);
  unsigned char r = static_cast<unsigned char>(hex_value(h[0]) * 16 + hex_value(h[1]));
  unsigned char g = static_cast<unsigned char>(hex_value(h[2]) * 16 + hex_value(h[3]));
  unsigned char b = static_cast<unsigned char>(hex_value(h[4]) * 16 + hex_value(h[5]));
  std::string rgb;
  rgb.reserve(kSize * kSize * 3);
  for (int i = 0; i < kSize * kSize; ++i) {
    rgb.push_back(static_cast<char>(r));
    rgb.push_back(static_cast<char>(g));
    rgb.push_back(static_cast<char>(b));
  }
  return encode_png_rgb(kSize, kSize, rgb);
}

HttpImageProvider::HttpImageProvider(ImageHttpOptions options,
                                     std::shared_ptr<HttpTransport> transport)
    : options_(std::move(options)), transport_(std::move(transport)) {
  while (!options_.base_url.empty() && options_.base_url.back() == '/') {
    options_.base_url.pop_back();
  }
}

GeneratedImage HttpImageProvider::generate(const std::string& prompt) {
  nlohmann::json body = {{"model", options_.model},
                         {"prompt", prompt},
                         {"n", 1},
                         {"size", options_.size},
                         {"response_format", "b64_json"}};
  HttpRequest req;
  req.method = "POST";
  req.url = options_.base_url + "/images/generations";
  req.headers["Content-Type"] = "application/json";
  if (!options_.api_key.empty()) req.headers["Authorization"] = "Bearer " + options_.api_key;
  req.body = body.dump();

  auto resp = send_with_retry(*transport_, req, options_.retry);
  if (resp.status == 400) {
    // Policy refusals come back as 400 with a content_policy_violation code.
    auto j = nlohmann::json::parse(resp.body, nullptr, false);
    std::string code;
    if (j.is_object() && j.contains("error") && j["error"].is_object()) {
      code = j["error"].value("code", "");
    }
    if (code == "content_policy_violation" ||
        resp.body.find("content_policy_violation") != std::string::npos) {
      throw Error(ErrorCode::kContentRejected, "image provider refused the prompt",
                  {{"status", 400}, {"body", resp.body.substr(0, 2000)}});
    }
  }
  if (resp.status < 200 || resp.status >= 300) {
    throw Error(ErrorCode::kImageProviderUnavailable,
                "image generation failed: " +
                    (resp.status == 0 ? resp.error : "HTTP " + std::to_string(resp.status)),
                {{"status", resp.status}});
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(resp.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kImageProviderUnavailable,
                std::string("image response malformed: ") + e.what());
  }
  if (!j.contains("data") || !j["data"].is_array() || j["data"].empty()) {
    throw Error(ErrorCode::kImageProviderUnavailable, "image response has no data");
  }
  const auto& item = j["data"][0];
  GeneratedImage out;
  if (item.contains("b64_json")) {
    out.bytes = base64_decode(item["b64_json"].get<std::string>());
    return out;
  }
  if (item.contains("url")) {
    HttpRequest get;
    get.url = item["url"].get<std::string>();
    auto img = send_with_retry(*transport_, get, options_.retry);
    if (img.status < 200 || img.status >= 300) {
      throw Error(ErrorCode::kImageProviderUnavailable, "image download failed",
                  {{"status", img.status}});
    }
    out.bytes = img.body;
    return out;
  }
  throw Error(ErrorCode::kImageProviderUnavailable, "image response has neither b64_json nor url");
}

FixtureImageProvider::FixtureImageProvider(std::optional<fs::path> dir,
                                           std::shared_ptr<ImageProvider> live, bool record)
    : dir_(std::move(dir)), live_(std::move(live)), record_(record) {}

GeneratedImage FixtureImageProvider::generate(const std::string& prompt) {
  std::string key = prompt_hash(prompt);
  if (record_ && live_) {
    auto image = live_->generate(prompt);
    if (dir_) {
      write_file_atomic(*dir_ / "images" / (key + "." + image.extension), image.bytes);
    }
    image.deterministic = true;
    return image;
  }
  if (dir_) {
    fs::path recorded = *dir_ / "images" / (key + ".png");
    if (fs::exists(recorded)) return {read_file(recorded), "png", true};
  }
  return {placeholder_png(prompt), "png", true};
}

std::string ImageStore::put(const std::string& id, const GeneratedImage& image) {
  std::string ref = "images/" + id + "." + image.extension;
  write_file_atomic(root_ / ref, image.bytes);
  return ref;
}

}  // namespace metablend
