#pragma once

// Web-Mercator tile addressing (slippy / quadkey) and a cached HTTP
// tile fetcher with bounded concurrency.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <httplib.h>

#include "pednet/geo.hpp"

namespace pednet {

struct TileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LatitudeOutOfRange : TileError {
  using TileError::TileError;
};
struct HttpError : TileError {
  using TileError::TileError;
};
struct OfflineCacheMiss : TileError {
  using TileError::TileError;
};

inline constexpr double kMaxMercatorLat = 85.05113;

struct TileCoord {
  int z = 0;
  int x = 0;
  int y = 0;

  bool operator==(const TileCoord&) const = default;
};

inline TileCoord lonlat_to_tile(LonLat p, int z) {
  if (std::abs(p.lat) > kMaxMercatorLat)
    throw LatitudeOutOfRange("latitude outside Web-Mercator range");
  const int n = 1 << z;
  int x = static_cast<int>(std::floor((p.lon + 180.0) / 360.0 * n));
  const double latr = p.lat * kDegToRad;
  int y = static_cast<int>(
      std::floor((1.0 - std::log(std::tan(latr) + 1.0 / std::cos(latr)) / M_PI) / 2.0 * n));
  x = std::clamp(x, 0, n - 1);
  y = std::clamp(y, 0, n - 1);
  return {z, x, y};
}

// Quadkey digit k is x_bit + 2 * y_bit at each zoom level.
inline std::string tile_to_quadkey(TileCoord t) {
  std::string q;
  for (int i = t.z; i > 0; --i) {
    char d = '0';
    const int mask = 1 << (i - 1);
    if (t.x & mask) d += 1;
    if (t.y & mask) d += 2;
    q += d;
  }
  return q;
}

inline TileCoord quadkey_to_tile(const std::string& q) {
  TileCoord t;
  t.z = static_cast<int>(q.size());
  for (int i = t.z; i > 0; --i) {
    const int mask = 1 << (i - 1);
    switch (q[t.z - i]) {
      case '0': break;
      case '1': t.x |= mask; break;
      case '2': t.y |= mask; break;
      case '3': t.x |= mask; t.y |= mask; break;
      default: throw TileError("invalid quadkey digit");
    }
  }
  return t;
}

namespace detail {

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

}  // namespace pednet::detail

inline std::string expand_tile_url(const std::string& url_template, TileCoord t) {
  std::string s = detail::replace_all(url_template, "{z}", std::to_string(t.z));
  s = detail::replace_all(s, "{x}", std::to_string(t.x));
  s = detail::replace_all(s, "{y}", std::to_string(t.y));
  s = detail::replace_all(s, "{q}", tile_to_quadkey(t));
  return s;
}

struct FetchOptions {
  std::string url_template;  // must contain {z}/{x}/{y} or {q}
  std::filesystem::path cache_dir;
  int concurrency = 4;
  bool offline = false;
};

namespace detail {

inline std::pair<std::string, std::string> split_host(const std::string& url) {
  // "http://host:port/path" -> ("http://host:port", "/path")
  auto scheme = url.find("://");
  auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

}  // namespace pednet::detail

// Cache path is a deterministic function of the template host and the
// tile coordinates, so repeat runs and offline mode hit the same files.
inline std::filesystem::path tile_cache_path(const FetchOptions& opts, TileCoord t) {
  const auto [host, path] = detail::split_host(opts.url_template);
  std::filesystem::path dir = opts.cache_dir;
  if (const char* env = std::getenv("PEDNET_TILE_CACHE")) dir = env;
  return dir / detail::sanitize(host) / std::to_string(t.z) / std::to_string(t.x) /
         (std::to_string(t.y) + ".tile");
}

// Fetches tiles at most once per cache lifetime; writes go to a temp
// file and are renamed into place so concurrent writers stay safe.
inline std::vector<std::filesystem::path> fetch_tiles(const std::vector<TileCoord>& coords,
                                                      const FetchOptions& opts) {
  if (opts.url_template.find("{q}") == std::string::npos &&
      (opts.url_template.find("{z}") == std::string::npos ||
       opts.url_template.find("{x}") == std::string::npos ||
       opts.url_template.find("{y}") == std::string::npos))
    throw TileError("url template must contain {z}/{x}/{y} or {q}");

  std::vector<std::filesystem::path> paths(coords.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::string first_error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= coords.size()) return;
      const TileCoord t = coords[i];
      const std::filesystem::path p = tile_cache_path(opts, t);
      paths[i] = p;
      if (std::filesystem::exists(p)) continue;
      if (opts.offline) {
        std::lock_guard lock(err_mutex);
        if (first_error.empty())
          first_error = "offline cache miss for tile z" + std::to_string(t.z) + "/" +
                        std::to_string(t.x) + "/" + std::to_string(t.y);
        continue;
      }
      const std::string url = expand_tile_url(opts.url_template, t);
      const auto [host, path] = detail::split_host(url);
      httplib::Client client(host);
      client.set_connection_timeout(10);
      client.set_read_timeout(30);
      auto res = client.Get(path);
      if (!res || res->status != 200) {
        std::lock_guard lock(err_mutex);
        if (first_error.empty())
          first_error = "HTTP " + (res ? std::to_string(res->status) : std::string("error")) +
                        " fetching " + url;
        continue;
      }
      std::filesystem::create_directories(p.parent_path());
      const std::filesystem::path tmp = p.string() + ".part" + std::to_string(::getpid());
      {
        std::ofstream f(tmp, std::ios::binary);
        f.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
      }
      std::filesystem::rename(tmp, p);
    }
  };

  const int jobs = std::max(1, std::min<int>(opts.concurrency, static_cast<int>(coords.size())));
  std::vector<std::thread> threads;
  for (int i = 0; i < jobs; ++i) threads.emplace_back(worker);
  for (auto& th : threads) th.join();

  if (!first_error.empty()) {
    if (opts.offline) throw OfflineCacheMiss(first_error);
    throw HttpError(first_error);
  }
  return paths;
}

}  // namespace pednet
