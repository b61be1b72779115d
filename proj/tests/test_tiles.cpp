#include <catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

#include <httplib.h>

#include "pednet/tiles.hpp"

using namespace pednet;

TEST_CASE("zoom zero maps everything to the root tile") {
  const TileCoord t = lonlat_to_tile({-122.3, 47.6}, 0);
  CHECK(t.x == 0);
  CHECK(t.y == 0);
  CHECK(tile_to_quadkey(t).empty());
}

TEST_CASE("origin at zoom one is tile (1,1) with quadkey 3") {
  const TileCoord t = lonlat_to_tile({0.0, 0.0}, 1);
  CHECK(t.x == 1);
  CHECK(t.y == 1);
  CHECK(tile_to_quadkey(t) == "3");
}

TEST_CASE("Seattle at zoom 12 is tile (656, 1430)") {
  const TileCoord t = lonlat_to_tile({-122.3321, 47.6062}, 12);
  CHECK(t.x == 656);
  CHECK(t.y == 1430);
}

TEST_CASE("latitudes beyond the Mercator limit are rejected") {
  CHECK_THROWS_AS(lonlat_to_tile({0.0, 86.0}, 10), LatitudeOutOfRange);
  CHECK_THROWS_AS(lonlat_to_tile({0.0, -89.0}, 10), LatitudeOutOfRange);
}

TEST_CASE("quadkey roundtrip on random tiles up to zoom 20") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int z = 1 + static_cast<int>(rng() % 20);
    TileCoord t{z, static_cast<int>(rng() % (1u << z)), static_cast<int>(rng() % (1u << z))};
    const std::string q = tile_to_quadkey(t);
    CHECK(q.size() == static_cast<std::size_t>(z));
    CHECK(quadkey_to_tile(q) == t);
  }
  CHECK_THROWS_AS(quadkey_to_tile("0412"), TileError);
}

TEST_CASE("url templates expand slippy and quadkey placeholders") {
  CHECK(expand_tile_url("http://h/{z}/{x}/{y}.png", {3, 5, 2}) == "http://h/3/5/2.png");
  CHECK(expand_tile_url("http://h/t/{q}.jpg", {1, 1, 1}) == "http://h/t/3.jpg");
}

TEST_CASE("tile fetching caches and honors offline mode") {
  const auto cache = std::filesystem::temp_directory_path() /
                     ("pednet-tiles-" + std::to_string(::getpid()));
  std::filesystem::remove_all(cache);

  std::atomic<int> requests{0};
  httplib::Server server;
  server.Get(R"(/tiles/.*)", [&](const httplib::Request&, httplib::Response& res) {
    ++requests;
    res.set_content("tilebytes", "application/octet-stream");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  FetchOptions opts;
  opts.url_template = "http://127.0.0.1:" + std::to_string(port) + "/tiles/{z}/{x}/{y}.png";
  opts.cache_dir = cache;
  opts.concurrency = 2;

  const std::vector<TileCoord> coords{{5, 1, 2}, {5, 1, 3}, {5, 2, 2}};
  const auto paths = fetch_tiles(coords, opts);
  REQUIRE(paths.size() == 3);
  for (const auto& p : paths) CHECK(std::filesystem::exists(p));
  CHECK(requests.load() == 3);

  // warm cache: no further requests
  fetch_tiles(coords, opts);
  CHECK(requests.load() == 3);

  // offline with a warm cache works; a cold tile raises
  opts.offline = true;
  CHECK_NOTHROW(fetch_tiles(coords, opts));
  CHECK_THROWS_AS(fetch_tiles({{5, 9, 9}}, opts), OfflineCacheMiss);

  server.stop();
  server_thread.join();
  std::filesystem::remove_all(cache);
}

TEST_CASE("PEDNET_TILE_CACHE overrides the cache directory") {
  FetchOptions opts;
  opts.url_template = "http://tiles.example.com/{z}/{x}/{y}.png";
  opts.cache_dir = "/somewhere/else";
  ::setenv("PEDNET_TILE_CACHE", "/env/cache", 1);
  const auto p = tile_cache_path(opts, {3, 1, 2});
  ::unsetenv("PEDNET_TILE_CACHE");
  CHECK(p.string().rfind("/env/cache/", 0) == 0);
  CHECK(tile_cache_path(opts, {3, 1, 2}).string().rfind("/somewhere/else/", 0) == 0);
}

TEST_CASE("a malformed template is rejected") {
  FetchOptions opts;
  opts.url_template = "http://h/static.png";
  CHECK_THROWS_AS(fetch_tiles({{1, 0, 0}}, opts), TileError);
}
