#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "des/core/error.hpp"
#include "des/data/dataset.hpp"
#include "des/data/image_io.hpp"
#include "des/data/voc.hpp"
#include "des/visualize.hpp"
#include "test_util.hpp"
#include "voc_fuzz.hpp"

using namespace des;
using namespace des::data;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("des_test_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

ClassTable voc_classes() { return make_class_table({"person", "dog", "cat"}); }

}  // namespace

// ---- synthetic -------------------------------------------------------------

TEST(Synthetic, Deterministic) {
    auto a = gen_synthetic(7, 20);
    auto b = gen_synthetic(7, 20);
    ASSERT_EQ(a.size(), 20u);
    EXPECT_EQ(a, b);
    auto c = gen_synthetic(8, 20);
    EXPECT_NE(a[0].image, c[0].image);
}

TEST(Synthetic, EveryClassAppears) {
    for (std::uint64_t seed : {1u, 2u, 99u}) {
        for (std::size_t classes : {3u, 5u}) {
            std::set<int> seen;
            for (const Sample& s : gen_synthetic(seed, 100, classes)) {
                for (const auto& b : s.boxes) seen.insert(b.class_id);
            }
            EXPECT_EQ(seen.size(), classes);
            EXPECT_EQ(*seen.begin(), 1);
            EXPECT_EQ(*seen.rbegin(), static_cast<int>(classes));
        }
    }
}

TEST(Synthetic, ShapeCountsAndRanges) {
    for (const Sample& s : gen_synthetic(3, 200)) {
        EXPECT_GE(s.boxes.size(), 1u);
        EXPECT_LE(s.boxes.size(), 4u);
        EXPECT_EQ(s.image.shape(), (Shape{3, 64, 64}));
        for (double v : s.image.data()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        for (const auto& b : s.boxes) {
            EXPECT_EQ(validate(b), "");
            EXPECT_GE(b.xmin, 0.0);
            EXPECT_LE(b.xmax, 1.0);
        }
        EXPECT_EQ(s.seg_grid, rasterize(s.boxes, 8, 8));
    }
}

TEST(Synthetic, BoxesAreTight) {
    const std::size_t n = 64;
    for (std::size_t i = 0; i < 100; ++i) {
        SyntheticSample ss = gen_synthetic_sample(5, i, 3, n);
        ASSERT_EQ(ss.masks.size(), ss.sample.boxes.size());
        for (std::size_t k = 0; k < ss.masks.size(); ++k) {
            const auto& m = ss.masks[k];
            const auto& b = ss.sample.boxes[k];
            const int x0 = static_cast<int>(std::lround(b.xmin * n)), x1 = static_cast<int>(std::lround(b.xmax * n));
            const int y0 = static_cast<int>(std::lround(b.ymin * n)), y1 = static_cast<int>(std::lround(b.ymax * n));
            auto count_in = [&](int ax, int ay, int bx, int by) {
                std::size_t c = 0;
                for (int y = 0; y < static_cast<int>(n); ++y) {
                    for (int x = 0; x < static_cast<int>(n); ++x) {
                        if (m[static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x)] && x >= ax && x < bx &&
                            y >= ay && y < by) {
                            ++c;
                        }
                    }
                }
                return c;
            };
            const std::size_t total = count_in(0, 0, static_cast<int>(n), static_cast<int>(n));
            EXPECT_EQ(count_in(x0, y0, x1, y1), total) << "box must contain the whole shape";
            EXPECT_LT(count_in(x0 + 2, y0, x1, y1), total);
            EXPECT_LT(count_in(x0, y0 + 2, x1, y1), total);
            EXPECT_LT(count_in(x0, y0, x1 - 2, y1), total);
            EXPECT_LT(count_in(x0, y0, x1, y1 - 2), total);
        }
        for (std::size_t a = 0; a < ss.masks.size(); ++a) {
            for (std::size_t b = a + 1; b < ss.masks.size(); ++b) {
                for (std::size_t p = 0; p < n * n; ++p) EXPECT_FALSE(ss.masks[a][p] && ss.masks[b][p]);
            }
        }
    }
}

TEST(Synthetic, Errors) {
    EXPECT_THROW(gen_synthetic(1, 0), InvalidInput);
    EXPECT_THROW(gen_synthetic(1, 5, 6), InvalidInput);
    EXPECT_THROW(gen_synthetic(1, 5, 0), InvalidInput);
}

TEST(Synthetic, HorizontalFlip) {
    Sample s = gen_synthetic(4, 1)[0];
    Sample f = hflip(s);
    EXPECT_EQ(f.image.at(0, 3, 0), s.image.at(0, 3, 63));
    EXPECT_EQ(f.image.at(2, 10, 5), s.image.at(2, 10, 58));
    EXPECT_NEAR(f.boxes[0].xmin, 1.0 - s.boxes[0].xmax, 1e-15);
    EXPECT_NEAR(f.boxes[0].xmax, 1.0 - s.boxes[0].xmin, 1e-15);
    EXPECT_EQ(f.boxes[0].ymin, s.boxes[0].ymin);
    Sample back = hflip(f);
    EXPECT_EQ(back.image, s.image);
}

// ---- PPM -------------------------------------------------------------------

TEST(Ppm, WhitePixel) {
    const std::string bytes = std::string("P6\n1 1\n255\n") + "\xff\xff\xff";
    EXPECT_EQ(parse_ppm(bytes), Tensor({3, 1, 1}, 1.0));
}

TEST(Ppm, HeaderWithComments) {
    const std::string bytes = std::string("P6 # c\n# more\n2 1 255\n") + std::string("\x00\x80\xff\x10\x20\x30", 6);
    Tensor t = parse_ppm(bytes);
    EXPECT_EQ(t.shape(), (Shape{3, 1, 2}));
    EXPECT_DOUBLE_EQ(t.at(1, 0, 0), 128.0 / 255.0);
    EXPECT_DOUBLE_EQ(t.at(2, 0, 1), 48.0 / 255.0);
}

TEST(Ppm, RoundTripWithinQuantization) {
    Rng rng(1);
    Tensor img = des::testing::random_tensor({3, 17, 23}, rng, 0.0, 1.0);
    auto dir = temp_dir("ppm");
    write_ppm(img, (dir / "a.ppm").string());
    Tensor back = read_ppm((dir / "a.ppm").string());
    EXPECT_LE(max_abs_diff(img, back), 0.5 / 255.0 + 1e-12);
    EXPECT_EQ(parse_ppm(encode_ppm(back)), back);
}

TEST(Ppm, Errors) {
    auto offset_of = [](const std::string& b) -> long {
        try {
            parse_ppm(b);
        } catch (const ParseError& e) {
            return static_cast<long>(e.offset());
        }
        return -1;
    };
    try {
        parse_ppm("P3\n1 1\n255\n255 255 255\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("P3"), std::string::npos);
    }
    EXPECT_EQ(offset_of(""), 0);
    EXPECT_EQ(offset_of("P5\n1 1\n255\n\x00"), 1);
    EXPECT_EQ(offset_of("P6\nx 1\n255\n"), 3);
    EXPECT_EQ(offset_of("P6\n1 1\n65535\n"), 7);
    EXPECT_EQ(offset_of("P6\n2 2\n255\nabc"), 14);
    EXPECT_EQ(offset_of("P6\n0 2\n255\n"), 3);
    EXPECT_THROW(read_ppm("/nonexistent/x.ppm"), InvalidInput);
    EXPECT_THROW(encode_ppm(Tensor({1, 2, 2})), InvalidInput);
}

TEST(Pgm, Encode) {
    const std::string b = encode_pgm(Tensor({2, 2}, std::vector<double>{0.0, 1.0, 0.5, 2.0}));
    EXPECT_EQ(b, std::string("P5\n2 2\n255\n") + std::string("\x00\xff\x80\xff", 4));
    EXPECT_THROW(encode_pgm(Tensor({3, 2, 2})), InvalidInput);
}

// ---- VOC -------------------------------------------------------------------

TEST(Voc, MinimalDocument) {
    const std::string doc = R"(<annotation><size><width>300</width><height>300</height></size>
<object><name>person</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>100</xmax><ymax>200</ymax></bndbox></object>
</annotation>)";
    VocAnnotation a = parse_voc_xml(doc, voc_classes());
    EXPECT_EQ(a.width, 300u);
    ASSERT_EQ(a.boxes.size(), 1u);
    EXPECT_EQ(a.boxes[0].class_id, 1);
    EXPECT_DOUBLE_EQ(a.boxes[0].xmin, 0.0);
    EXPECT_DOUBLE_EQ(a.boxes[0].ymin, 0.0);
    EXPECT_NEAR(a.boxes[0].xmax, 0.3333, 1e-4);
    EXPECT_NEAR(a.boxes[0].ymax, 0.6667, 1e-4);
    EXPECT_DOUBLE_EQ(a.boxes[0].xmax, 100.0 / 300.0);
    EXPECT_FALSE(a.boxes[0].difficult);
}

TEST(Voc, FullDocumentWithDifficult) {
    VocAnnotation a = parse_voc_xml(des::testing::kVocSeed, voc_classes());
    EXPECT_EQ(a.width, 353u);
    EXPECT_EQ(a.height, 500u);
    EXPECT_EQ(a.depth, 3u);
    ASSERT_EQ(a.boxes.size(), 2u);
    EXPECT_EQ(a.boxes[0].class_id, 2);
    EXPECT_FALSE(a.boxes[0].difficult);
    EXPECT_DOUBLE_EQ(a.boxes[0].xmin, 47.0 / 353.0);
    EXPECT_DOUBLE_EQ(a.boxes[0].ymax, 371.0 / 500.0);
    EXPECT_EQ(a.boxes[1].class_id, 1);
    EXPECT_TRUE(a.boxes[1].difficult);
}

TEST(Voc, ZeroObjects) {
    VocAnnotation a = parse_voc_xml("<annotation><size><width>5</width><height>5</height></size></annotation>",
                                    voc_classes());
    EXPECT_TRUE(a.boxes.empty());
}

TEST(Voc, ReorderedElementsAndEntities) {
    const std::string doc = R"(<!-- c --><annotation>
  <object><bndbox><ymax>4</ymax><xmax>4</xmax><ymin>2</ymin><xmin>2</xmin></bndbox>
    <name> c&#97;t </name></object>
  <size><height>4</height><width>4</width></size>
</annotation>)";
    EXPECT_THROW(parse_voc_xml(doc, voc_classes()), ParseError);  // numeric references are outside the subset
    const std::string ok = R"(<annotation>
  <object attr="x"><bndbox><ymax>4</ymax><xmax>4</xmax><ymin>2</ymin><xmin>2</xmin></bndbox>
    <name> cat </name><extra/></object>
  <size><height>4</height><width>4</width></size>
</annotation>)";
    VocAnnotation a = parse_voc_xml(ok, voc_classes());
    ASSERT_EQ(a.boxes.size(), 1u);
    EXPECT_EQ(a.boxes[0].class_id, 3);
    EXPECT_DOUBLE_EQ(a.boxes[0].xmin, 0.25);
}

TEST(Voc, UnknownClass) {
    const std::string doc = R"(<annotation><size><width>10</width><height>10</height></size>
<object><name>horse</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>5</xmax><ymax>5</ymax></bndbox></object>
</annotation>)";
    try {
        parse_voc_xml(doc, voc_classes());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("unknown class"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("horse"), std::string::npos);
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Voc, MissingElementNamesItAndLine) {
    const std::string doc = "<annotation>\n<size><width>10</width><height>10</height></size>\n"
                            "<object>\n<name>dog</name>\n</object>\n</annotation>";
    try {
        parse_voc_xml(doc, voc_classes());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("<bndbox>"), std::string::npos);
        EXPECT_EQ(e.line(), 3u);
    }
    try {
        parse_voc_xml("<annotation>\n</annotation>", voc_classes());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("<size>"), std::string::npos);
    }
}

TEST(Voc, ValidationErrors) {
    auto doc = [](int xmin, int xmax) {
        return "<annotation><size><width>10</width><height>10</height></size><object><name>dog</name><bndbox><xmin>" +
               std::to_string(xmin) + "</xmin><ymin>1</ymin><xmax>" + std::to_string(xmax) +
               "</xmax><ymax>5</ymax></bndbox></object></annotation>";
    };
    EXPECT_THROW(parse_voc_xml(doc(6, 5), voc_classes()), InvalidInput);
    EXPECT_THROW(parse_voc_xml(doc(1, 11), voc_classes()), InvalidInput);
    EXPECT_NO_THROW(parse_voc_xml(doc(5, 5), voc_classes()));  // one pixel wide: (4/10, 5/10)
    EXPECT_THROW(parse_voc_xml("<a><b></a>", voc_classes()), ParseError);
    EXPECT_THROW(parse_voc_xml("", voc_classes()), ParseError);
    EXPECT_THROW(parse_voc_xml("<annotation>", voc_classes()), ParseError);
    EXPECT_THROW(parse_voc_xml("<annotation><size><width>x</width></size></annotation>", voc_classes()), ParseError);
}

TEST(Voc, FuzzOnlyStructuredErrors) {
    Rng rng(2024);
    std::size_t ok = 0, parse = 0, invalid = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::string doc = des::testing::mutate_voc(des::testing::kVocSeed, rng);
        try {
            parse_voc_xml(doc, voc_classes());
            ++ok;
        } catch (const ParseError&) {
            ++parse;
        } catch (const InvalidInput&) {
            ++invalid;
        }
    }
    EXPECT_EQ(ok + parse + invalid, 1000u);
    EXPECT_GT(ok, 0u);
    EXPECT_GT(parse, 0u);
}

// ---- manifest --------------------------------------------------------------

TEST(Manifest, SaveLoadRoundTrip) {
    auto dir = temp_dir("manifest");
    Dataset ds{make_class_table(synthetic_class_names(3)), gen_synthetic(11, 6)};
    const std::string manifest = save_dataset(ds, dir.string());
    Dataset back = load_dataset(manifest);
    EXPECT_EQ(back.classes, ds.classes);
    ASSERT_EQ(back.samples.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(back.samples[i].image, ds.samples[i].image);  // generator output is already 8-bit
        EXPECT_EQ(back.samples[i].boxes, ds.samples[i].boxes);
        EXPECT_EQ(back.samples[i].seg_grid, ds.samples[i].seg_grid);
    }
}

TEST(Manifest, VocAnnotationsAndErrors) {
    auto dir = temp_dir("manifest_voc");
    write_ppm(Tensor({3, 500, 353}, 0.5), (dir / "a.ppm").string());
    write_file((dir / "a.xml").string(), des::testing::kVocSeed);
    write_file((dir / "m.json").string(),
               R"({"classes": ["person", "dog"], "samples": [{"image": "a.ppm", "annotation": "a.xml"}]})");
    Dataset ds = load_dataset((dir / "m.json").string());
    EXPECT_EQ(ds.classes, (ClassTable{"background", "person", "dog"}));
    ASSERT_EQ(ds.samples[0].boxes.size(), 2u);
    EXPECT_TRUE(ds.samples[0].boxes[1].difficult);

    write_file((dir / "bad.json").string(),
               R"({"classes": ["x"], "samples": [{"image": "missing.ppm", "annotation": "a.xml"}]})");
    EXPECT_THROW(load_dataset((dir / "bad.json").string()), InvalidInput);
    write_file((dir / "bad2.json").string(), R"({"samples": []})");
    EXPECT_THROW(load_dataset((dir / "bad2.json").string()), ParseError);
}

TEST(Manifest, JsonAnnotation) {
    ClassTable t = make_class_table({"a", "b"});
    auto boxes = parse_json_annotation(
        R"({"boxes": [{"class": "b", "xmin": 0.1, "ymin": 0.2, "xmax": 0.5, "ymax": 0.6, "difficult": 1},
                      {"class": 1, "xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1}]})",
        t);
    ASSERT_EQ(boxes.size(), 2u);
    EXPECT_EQ(boxes[0].class_id, 2);
    EXPECT_TRUE(boxes[0].difficult);
    EXPECT_EQ(boxes[1].class_id, 1);
    EXPECT_EQ(parse_json_annotation(json_annotation(boxes, t), t), boxes);
    EXPECT_THROW(parse_json_annotation(R"({"boxes": [{"class": "zz", "xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1}]})", t),
                 ParseError);
    EXPECT_THROW(parse_json_annotation(R"({"boxes": [{"class": "a", "xmin": 0.5, "ymin": 0, "xmax": 0.5, "ymax": 1}]})", t),
                 InvalidInput);
    EXPECT_THROW(parse_json_annotation(R"({"boxes": [{"class": "a"}]})", t), ParseError);
}

// ---- visualization ---------------------------------------------------------

TEST(Visualize, DrawDetectionsOutlinesOnly) {
    Tensor img({3, 10, 10}, 0.25);
    detect::Detection d{1, 0.9, detect::CornerBox{0.2, 0.2, 0.6, 0.6}};
    Tensor out = draw_detections(img, {d});
    // box covers pixels 2..5; outline on rows/cols 2 and 5
    EXPECT_EQ(out.at(0, 2, 2), 1.0);
    EXPECT_EQ(out.at(0, 5, 3), 1.0);
    EXPECT_EQ(out.at(0, 3, 3), 0.25);
    EXPECT_EQ(out.at(0, 0, 0), 0.25);
    EXPECT_EQ(img.at(0, 2, 2), 0.25);
    EXPECT_THROW(draw_detections(Tensor({1, 4, 4}), {d}), InvalidInput);
}

TEST(Visualize, LabelImageScalesByClassCount) {
    SegGrid g{1, 3, {0, 1, 2}};
    Tensor t = label_image(g, 2);
    EXPECT_EQ(t.shape(), (Shape{1, 3}));
    EXPECT_EQ(t[0], 0.0);
    EXPECT_EQ(t[1], 0.5);
    EXPECT_EQ(t[2], 1.0);
}

TEST(Visualize, ChannelMosaicLayout) {
    Tensor m({3, 2, 2});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<double>(i % 4);
    Tensor out = channel_mosaic(m, 2);
    EXPECT_EQ(out.shape(), (Shape{5, 5}));
    EXPECT_EQ(out[0 * 5 + 0], 0.0);
    EXPECT_EQ(out[1 * 5 + 1], 1.0);
    EXPECT_EQ(out[0 * 5 + 2], 0.0);  // gap column
    EXPECT_EQ(out[4 * 5 + 1], 1.0);  // third channel, second row of tiles
    EXPECT_THROW(channel_mosaic(Tensor({2, 2}), 2), InvalidInput);
}
