#include <fstream>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "texturesmith/config.hpp"
#include "texturesmith/error.hpp"
#include "texturesmith/image_io.hpp"

using namespace texturesmith;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

ConfigErrc config_code(const std::string& text, std::size_t* line = nullptr) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    if (line) *line = e.line();
    return e.code();
  }
  FAIL("expected a config error");
  return ConfigErrc::Syntax;
}

const char* kMinimal =
    "content = in.ppm\n"
    "test_net.seed = 3\n"
    "seeds.fg = 1,2\n"
    "seeds.bg = 5,6\n"
    "out.image = out.ppm\n";

}  // namespace

TEST_SUITE("pnm") {
  TEST_CASE("2x2 P6 maps bytes to byte/255") {
    std::string raw = "P6\n2 2\n255\n";
    const unsigned char px[12] = {0, 128, 255, 1, 2, 3, 10, 20, 30, 40, 50, 60};
    raw.append(reinterpret_cast<const char*>(px), 12);
    const ImageTensor t = decode_pnm(bytes_of(raw));
    CHECK(t.shape() == Shape{3, 2, 2});
    CHECK(t.at(0, 0, 0) == 0.0f);
    CHECK(t.at(1, 0, 0) == 128.0f / 255.0f);
    CHECK(t.at(2, 0, 0) == 1.0f);
    CHECK(t.at(0, 0, 1) == 1.0f / 255.0f);
    CHECK(t.at(2, 1, 1) == 60.0f / 255.0f);
    CHECK(encode_pnm(t) == bytes_of(raw));
  }

  TEST_CASE("comments and P5") {
    std::string raw = "P5 # grey\n# a comment line\n3 1\n255\n";
    raw += std::string("\x00\x7f\xff", 3);
    const ImageTensor t = decode_pnm(bytes_of(raw));
    CHECK(t.shape() == Shape{1, 1, 3});
    CHECK(t.values()[1] == 127.0f / 255.0f);
  }

  TEST_CASE("rejects what it cannot read") {
    auto code_of = [](const std::string& raw) {
      try {
        decode_pnm(bytes_of(raw));
      } catch (const FormatError& e) {
        return static_cast<int>(e.code());
      }
      return -1;
    };
    CHECK(code_of("P3\n1 1\n255\n0 0 0\n") == static_cast<int>(FormatErrc::BadMagic));
    CHECK(code_of("P6\n1 1\n65535\n") == static_cast<int>(FormatErrc::InvalidValue));
    CHECK(code_of("P6\n2 2\n255\nabc") == static_cast<int>(FormatErrc::Truncated));
    CHECK(code_of("P6\nx 2\n255\n") == static_cast<int>(FormatErrc::InvalidValue));
    CHECK(code_of("P6\n2") != -1);
  }

  TEST_CASE("save rounds to nearest and clamps") {
    ImageTensor t(1, 1, 4);
    t.values()[0] = -0.5f;
    t.values()[1] = 0.5f;
    t.values()[2] = 100.6f / 255.0f;
    t.values()[3] = 3.0f;
    const auto bytes = encode_pnm(t);
    const std::size_t off = bytes.size() - 4;
    CHECK(bytes[off] == 0);
    CHECK(bytes[off + 1] == 128);
    CHECK(bytes[off + 2] == 101);
    CHECK(bytes[off + 3] == 255);
  }

  TEST_CASE("randomized 8-bit images round-trip bitwise") {
    const auto dir = fixture::scratch_dir("pnm_roundtrip");
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      const Shape shape{seed % 2 ? 3u : 1u, 1 + seed % 7, 1 + (seed * 3) % 11};
      const ImageTensor t = fixture::random_8bit_image(seed, shape);
      const auto bytes = encode_pnm(t);
      CHECK(encode_pnm(decode_pnm(bytes)) == bytes);
      CHECK(decode_pnm(bytes) == t);
      const auto path = dir / ("img" + std::to_string(seed) + ".ppm");
      save_image(t, path);
      CHECK(load_image(path) == t);
      CHECK(read_file(path) == bytes);
    }
  }
}

TEST_SUITE("png") {
  TEST_CASE("8-bit round trip through PNG") {
    const auto dir = fixture::scratch_dir("png_roundtrip");
    const ImageTensor rgb = fixture::random_8bit_image(5, {3, 9, 13});
    save_image(rgb, dir / "a.png");
    CHECK(load_image(dir / "a.png") == rgb);
    const ImageTensor grey = fixture::random_8bit_image(6, {1, 4, 4});
    save_image(grey, dir / "b.png");
    CHECK(load_image(dir / "b.png") == grey);
  }

  TEST_CASE("corrupt PNG is a format error") {
    const auto dir = fixture::scratch_dir("png_corrupt");
    save_image(fixture::random_8bit_image(7, {3, 8, 8}), dir / "c.png");
    auto bytes = read_file(dir / "c.png");
    bytes.resize(bytes.size() / 2);
    write_file(dir / "c.png", bytes);
    CHECK_THROWS_AS(load_image(dir / "c.png"), FormatError);
  }
}

TEST_SUITE("files") {
  TEST_CASE("missing files and directories are I/O errors") {
    CHECK_THROWS_AS(load_image("/nonexistent/dir/x.ppm"), IoError);
    CHECK_THROWS_AS(save_image(ImageTensor(3, 2, 2), "/nonexistent/dir/x.ppm"), IoError);
    CHECK_THROWS_AS(load_config("/nonexistent/dir/x.cfg"), IoError);
  }

  TEST_CASE("mask save and load") {
    const auto dir = fixture::scratch_dir("mask_io");
    Mask m(3, 4);
    m.at(1, 2) = 1.0;
    m.at(0, 0) = 1.0;
    save_mask(m, dir / "m.pgm");
    const auto bytes = read_file(dir / "m.pgm");
    CHECK(std::string(bytes.begin(), bytes.begin() + 2) == "P5");
    CHECK(load_mask(dir / "m.pgm") == m);
  }
}

TEST_SUITE("parse_config") {
  TEST_CASE("empty text names the missing content key") {
    try {
      parse_config("");
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(e.code() == ConfigErrc::MissingKey);
      CHECK(std::string(e.what()).find("content") != std::string::npos);
    }
  }

  TEST_CASE("minimal config populates defaults") {
    const PipelineConfig c = parse_config(kMinimal);
    CHECK(c.content == "in.ppm");
    CHECK(std::get<TestNetSource>(c.network) == TestNetSource{3, 3, 8});
    const auto& seeds = std::get<SeedLists>(c.segmentation);
    CHECK(seeds.fg == std::vector<Pixel>{{1, 2}});
    CHECK(seeds.bg == std::vector<Pixel>{{5, 6}});
    CHECK(c.crf == PairwiseParams{});
    CHECK(c.crf_iterations == 5);
    CHECK(c.synth == SynthesisConfig{});
    CHECK(c.feather.radius == 2);
    CHECK(c.out_image == "out.ppm");
    CHECK_FALSE(c.out_masks.has_value());
    CHECK(c.styles.empty());
  }

  TEST_CASE("every key") {
    const PipelineConfig c = parse_config(
        "# full\n"
        "content = c.png   # trailing comment\n"
        "style.fg = s1.ppm\n"
        "style_mask.fg = s1_mask.pgm\n"
        "style.0 = s0.ppm\n"
        "style.2 = s2#x.ppm\n"
        "weights = net.txsw\n"
        "unary = u.unry\n"
        "crf.w_app = 2.5\n"
        "crf.theta_alpha = 6\n"
        "crf.theta_beta = 0.2\n"
        "crf.w_smooth = 0.5\n"
        "crf.theta_gamma = 2\n"
        "crf.iters = 7\n"
        "synth.layers = 1, 3\n"
        "synth.weights = 0.25,0.75\n"
        "synth.init = noise\n"
        "synth.step = 1e5\n"
        "synth.max_iters = 40\n"
        "synth.tol = 1e-4\n"
        "synth.mean = 0.4,0.45,0.5\n"
        "feather.radius = 3\n"
        "out.image = o/r.png\n"
        "out.masks = o/m\n"
        "out.trace = o/t\n");
    CHECK(c.content == "c.png");
    REQUIRE(c.styles.size() == 3);
    CHECK(c.styles.at(1) == StyleEntry{"s1.ppm", std::string("s1_mask.pgm")});
    CHECK(c.styles.at(0).image == "s0.ppm");
    CHECK(c.styles.at(2).image == "s2#x.ppm");
    CHECK(std::get<WeightsFile>(c.network).path == "net.txsw");
    CHECK(std::get<UnaryFile>(c.segmentation).path == "u.unry");
    CHECK(c.crf == PairwiseParams{2.5, 6.0, 0.2, 0.5, 2.0});
    CHECK(c.crf_iterations == 7);
    CHECK(c.synth.layer_indices == std::vector<std::size_t>{1, 3});
    CHECK(c.synth.layer_weights == std::vector<float>{0.25f, 0.75f});
    CHECK(c.synth.init_mode == InitMode::WhiteNoise);
    CHECK(c.synth.step_size == 1e5);
    CHECK(c.synth.max_iterations == 40);
    CHECK(c.synth.convergence_tol == 1e-4);
    CHECK(c.synth.channel_mean == std::vector<float>{0.4f, 0.45f, 0.5f});
    CHECK(c.feather.radius == 3);
    CHECK(*c.out_masks == "o/m");
    CHECK(*c.out_trace == "o/t");
  }

  TEST_CASE("error kinds carry line numbers") {
    std::size_t line = 0;
    CHECK(config_code(std::string(kMinimal) + "bogus line\n", &line) == ConfigErrc::Syntax);
    CHECK(line == 6);
    CHECK(config_code(std::string(kMinimal) + "colour = red\nstyle.x = y\n", &line) == ConfigErrc::UnknownKey);
    CHECK(line == 6);
    CHECK(config_code(std::string(kMinimal) + "crf.iters = five\n", &line) == ConfigErrc::TypeMismatch);
    CHECK(line == 6);
    CHECK(config_code(std::string(kMinimal) + "synth.init = random\n") == ConfigErrc::TypeMismatch);
    CHECK(config_code(std::string(kMinimal) + "seeds.fg = 1,2,3\n") == ConfigErrc::Conflict);
    CHECK(config_code(std::string(kMinimal) + "content = again.ppm\n", &line) == ConfigErrc::Conflict);
    CHECK(line == 6);
    CHECK(config_code(std::string(kMinimal) + "style.fg = a.ppm\nstyle.1 = b.ppm\n") == ConfigErrc::Conflict);
    CHECK(config_code(std::string(kMinimal) + "style_mask.1 = m.pgm\n") == ConfigErrc::Conflict);
  }

  TEST_CASE("unknown keys are all listed") {
    try {
      parse_config(std::string(kMinimal) + "a = 1\nb.c = 2\n");
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("a, b.c") != std::string::npos);
    }
  }

  TEST_CASE("source exclusivity and required keys") {
    const std::string base = "content = a.ppm\nout.image = o.ppm\n";
    CHECK(config_code(base + "seeds.fg = 1,1\nseeds.bg = 2,2\n") == ConfigErrc::MissingKey);
    CHECK(config_code(base + "weights = w\ntest_net.seed = 1\nmask = m.pgm\n") == ConfigErrc::Conflict);
    CHECK(config_code(base + "weights = w\n") == ConfigErrc::MissingKey);
    CHECK(config_code(base + "weights = w\nunary = u\nmask = m\n") == ConfigErrc::Conflict);
    CHECK(config_code(base + "weights = w\nseeds.fg = 1,1\n") == ConfigErrc::MissingKey);
    CHECK(config_code("content = a.ppm\nweights = w\nmask = m\n") == ConfigErrc::MissingKey);
    CHECK(config_code(base + "weights = \nmask = m\n") == ConfigErrc::TypeMismatch);
  }

  TEST_CASE("invalid values") {
    CHECK(config_code(std::string(kMinimal) + "synth.step = -1\n") == ConfigErrc::InvalidValue);
    CHECK(config_code(std::string(kMinimal) + "synth.max_iters = 0\n") == ConfigErrc::InvalidValue);
    CHECK(config_code(std::string(kMinimal) + "crf.theta_beta = 0\n") == ConfigErrc::InvalidValue);
    CHECK(config_code(std::string(kMinimal) + "synth.layers = 1,3\nsynth.weights = 1\n") == ConfigErrc::InvalidValue);
  }

  TEST_CASE("emit then parse is the identity") {
    PipelineConfig c = parse_config(kMinimal);
    CHECK(parse_config(emit_config(c)) == c);
    c.styles[0] = {"bg style.ppm", std::nullopt};
    c.styles[4] = {"x.ppm", std::string("xm.pgm")};
    c.network = WeightsFile{"w.txsw"};
    c.segmentation = MaskFile{"labels.pgm"};
    c.crf = PairwiseParams{1.0 / 3.0, 7.25, 0.1, 2.0 / 3.0, 1e-3};
    c.crf_iterations = 9;
    c.synth.layer_indices = {1, 5};
    c.synth.layer_weights = {1.0f / 3.0f, 2.0f / 3.0f};
    c.synth.init_mode = InitMode::WhiteNoise;
    c.synth.step_size = 0.1;
    c.synth.convergence_tol = 1.0 / 7.0;
    c.synth.channel_mean = {0.485f, 0.456f, 0.406f};
    c.feather.radius = 0;
    c.out_masks = "masks";
    c.out_trace = "trace";
    const std::string text = emit_config(c);
    const PipelineConfig back = parse_config(text);
    CHECK(back == c);
    CHECK(emit_config(back) == text);
    c.segmentation = UnaryFile{"u.unry"};
    CHECK(parse_config(emit_config(c)) == c);
    c.segmentation = SeedLists{{{1, 2}, {3, 4}}, {{0, 0}}};
    CHECK(parse_config(emit_config(c)) == c);
  }

  TEST_CASE("load_config records the file's directory") {
    const auto dir = fixture::scratch_dir("load_config");
    {
      std::ofstream out(dir / "a.cfg");
      out << kMinimal;
    }
    CHECK(load_config(dir / "a.cfg").base_dir == dir);
  }
}
