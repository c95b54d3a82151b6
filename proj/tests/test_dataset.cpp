#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "ppnet/dataset.hpp"
#include "ppnet/diagnostics.hpp"
#include "ppnet/errors.hpp"
#include "ppnet/image_io.hpp"

using namespace ppnet;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

RasterImage random_raster(int w, int h, int ch, std::uint64_t seed) {
  std::mt19937 rng(seed);
  RasterImage img;
  img.width = w;
  img.height = h;
  img.channels = ch;
  img.samples.resize(static_cast<std::size_t>(w) * h * ch);
  for (auto& s : img.samples) s = static_cast<std::uint16_t>(rng() % 256);
  return img;
}

}  // namespace

TEST_CASE("manifest parsing") {
  SUBCASE("well formed") {
    const auto m = parse_manifest("ref,dist,mos,mos_std\na.ppm,b.ppm,5.5,0.7\n# note\na.ppm,c.ppm,3,1\n",
                                  "/data", "m.csv");
    REQUIRE(m.records.size() == 2);
    CHECK(m.records[0].ref == fs::path("/data/a.ppm"));
    CHECK(m.records[1].mos == 3.0);
    CHECK(m.records[1].mos_std == 1.0);
    CHECK(m.records[1].row == 4);
  }
  SUBCASE("column order, quotes, BOM, CRLF and extra columns") {
    const auto m = parse_manifest(
        "\xEF\xBB\xBFmos_std,extra,dist,ref,mos\r\n0.5,x,\"d, 1.ppm\",/abs/r.ppm,2\r\n", "base", "m");
    REQUIRE(m.records.size() == 1);
    CHECK(m.records[0].dist == fs::path("base/d, 1.ppm"));
    CHECK(m.records[0].ref == fs::path("/abs/r.ppm"));
    CHECK(m.records[0].mos_std == 0.5);
  }
  SUBCASE("missing column is named") {
    const auto msg = message_of([] { parse_manifest("ref,dist,mos\na,b,1\n", ".", "m.csv"); });
    CHECK(msg.find("mos_std") != std::string::npos);
  }
  SUBCASE("bad rows") {
    CHECK_THROWS_AS(parse_manifest("ref,dist,mos,mos_std\na,b,x,1\n", ".", "m"), ParseError);
    CHECK_THROWS_AS(parse_manifest("ref,dist,mos,mos_std\na,b,1,-1\n", ".", "m"), ParseError);
    CHECK_THROWS_AS(parse_manifest("ref,dist,mos,mos_std\na,b,1\n", ".", "m"), ParseError);
    CHECK_THROWS_AS(parse_manifest("ref,dist,mos,mos_std\na,b,1,1\na,b,2,1\n", ".", "m"), ParseError);
    CHECK_THROWS_AS(parse_manifest("ref,dist,mos,mos_std\n", ".", "m"), ParseError);
    CHECK_THROWS_AS(parse_manifest("", ".", "m"), ParseError);
    const auto msg = message_of([] { parse_manifest("ref,dist,mos,mos_std\na,b,1,1\nc,d,nan?,1\n", ".", "m.csv"); });
    CHECK(msg.find("3") != std::string::npos);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_manifest("/nonexistent/m.csv"), InputError); }
}

TEST_CASE("manifest write and reload") {
  testutil::TempDir dir("manifest");
  fs::create_directories(dir / "img");
  Manifest m;
  m.name = "t";
  m.records.push_back({dir / "img/a.ppm", dir / "img/b.ppm", 0.1 + 0.2, 1.0 / 3.0, 0});
  m.records.push_back({dir / "img/a.ppm", dir / "img/c d.ppm", 4.0, 0.0, 0});
  write_manifest(m, dir / "m.csv");
  const auto back = load_manifest(dir / "m.csv");
  REQUIRE(back.records.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(fs::weakly_canonical(back.records[i].dist) == fs::weakly_canonical(m.records[i].dist));
    CHECK(back.records[i].mos == m.records[i].mos);
    CHECK(back.records[i].mos_std == m.records[i].mos_std);
  }
}

TEST_CASE("PPM decoding and scaling") {
  testutil::TempDir dir("ppm");
  const std::string bytes = std::string("P6\n# comment\n2 2\n255\n") +
                            std::string("\xFF\x00\x00\x00\xFF\x00\x00\x00\xFF\x80\x80\x80", 12);
  write_text(dir / "a.ppm", bytes);
  const auto t = load_image_as_tensor(dir / "a.ppm", 192.0);
  CHECK(t.channels() == 3);
  CHECK(t.at(0, 0, 0) == 1.0);
  CHECK(t.at(0, 0, 1) == 0.0);
  CHECK(t.at(0, 0, 2) == 0.0);
  CHECK(t.at(0, 1, 1) == 1.0);
  CHECK(t.at(1, 1, 0) == doctest::Approx(128.0 / 255.0));
  CHECK(t.sampling_frequency() == 192.0);

  // 16-bit samples are big-endian.
  write_text(dir / "b.ppm", std::string("P6 1 1 65535\n") + std::string("\xFF\xFF\x00\x00\x80\x00", 6));
  const auto w = load_image_as_tensor(dir / "b.ppm", 1.0);
  CHECK(w.at(0, 0, 0) == 1.0);
  CHECK(w.at(0, 0, 2) == doctest::Approx(32768.0 / 65535.0));

  write_text(dir / "short.ppm", std::string("P6\n2 2\n255\n\x01\x02", 14));
  CHECK_THROWS_AS(decode_image(dir / "short.ppm"), DecodeError);
  write_text(dir / "junk.ppm", "hello world");
  CHECK_THROWS_AS(decode_image(dir / "junk.ppm"), DecodeError);
  CHECK_THROWS_AS(decode_image(dir / "none.ppm"), InputError);
}

TEST_CASE("grayscale is replicated with a warning") {
  testutil::TempDir dir("pgm");
  auto g = random_raster(5, 4, 1, 3);
  write_ppm(dir / "g.pgm", g);
  ScopedWarningCapture cap;
  const auto t = load_image_as_tensor(dir / "g.pgm", 10.0);
  CHECK(t.channels() == 3);
  CHECK(t.at(2, 3, 0) == t.at(2, 3, 2));
  CHECK(t.at(2, 3, 1) == doctest::Approx(g.samples[2 * 5 + 3] / 255.0));
  CHECK(cap.messages().size() == 1);
}

TEST_CASE("BMP and PPM decode identically") {
  testutil::TempDir dir("bmp");
  for (int w : {1, 2, 3, 7}) {  // exercises row padding
    CAPTURE(w);
    const auto img = random_raster(w, 5, 3, 40 + w);
    write_ppm(dir / "x.ppm", img);
    write_bmp(dir / "x.bmp", img);
    const auto a = decode_image(dir / "x.ppm");
    const auto b = decode_image(dir / "x.bmp");
    CHECK(a.samples == img.samples);
    CHECK(b.samples == img.samples);
    CHECK(b.width == w);
    CHECK(b.height == 5);
  }
}

TEST_CASE("center crop and raster round trip") {
  const auto t = testutil::random_tensor(9, 12, 3, 10.0, 1);
  const auto c = center_crop(t, 4);
  CHECK(c.height() == 4);
  CHECK(c.width() == 4);
  CHECK(c.at(0, 0, 1) == t.at(2, 4, 1));
  CHECK(center_crop(t, 0).size() == t.size());
  CHECK(center_crop(t, 50).width() == 12);

  const auto r = tensor_to_raster(t);
  const auto back = raster_to_tensor(r, 10.0);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(back.data()[i] - t.data()[i]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("TID layout conversion") {
  testutil::TempDir dir("tid");
  fs::create_directories(dir / "reference_images");
  fs::create_directories(dir / "distorted_images");
  write_bmp(dir / "reference_images/I01.BMP", random_raster(4, 4, 3, 1));
  write_bmp(dir / "reference_images/i02.bmp", random_raster(4, 4, 3, 2));
  for (const char* n : {"i01_01_1.bmp", "i01_01_2.bmp", "i02_05_1.bmp"}) {
    write_bmp(dir / "distorted_images" / n, random_raster(4, 4, 3, 3));
  }
  write_text(dir / "mos_with_names.txt", "5.5 i01_01_1.bmp\n4.25 i01_01_2.bmp\n3 i02_05_1.bmp\n");
  write_text(dir / "mos_std.txt", "0.5\n0.75\n1\n");
  const auto m = convert_tid(dir.path);
  REQUIRE(m.records.size() == 3);
  CHECK(m.records[0].ref.filename() == "I01.BMP");
  CHECK(m.records[2].ref.filename() == "i02.bmp");
  CHECK(m.records[1].mos == 4.25);
  CHECK(m.records[2].mos_std == 1.0);

  write_manifest(m, dir / "tid.csv");
  const auto back = load_manifest(dir / "tid.csv");
  CHECK(back.records.size() == 3);
  CHECK(fs::exists(back.records[2].ref));

  write_text(dir / "mos_std.txt", "0.5\n0.75\n");
  CHECK_THROWS_AS(convert_tid(dir.path), ParseError);
  CHECK_THROWS_AS(convert_tid(dir / "nothing"), InputError);
}

TEST_CASE("KADID layout conversion") {
  testutil::TempDir dir("kadid");
  write_text(dir / "dmos.csv", "dist_img,ref_img,dmos,var\nI01_01_01.png,I01.png,4.57,0.25\nI01_01_02.png,I01.png,4.33,0.0\n");
  const auto m = convert_kadid(dir.path);
  REQUIRE(m.records.size() == 2);
  CHECK(m.records[0].mos_std == 0.5);
  CHECK(m.records[0].dist == dir.path / "images" / "I01_01_01.png");
  write_text(dir / "dmos.csv", "dist_img,ref_img,dmos\nx,y,1\n");
  const auto msg = message_of([&] { convert_kadid(dir.path); });
  CHECK(msg.find("var") != std::string::npos);
}
