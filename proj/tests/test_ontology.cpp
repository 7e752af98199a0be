#include <gtest/gtest.h>

#include "quadcode/ontology.hpp"
#include "quadcode/rng.hpp"
#include "test_support.hpp"

namespace quadcode {
namespace {

CameoErrorKind cameo_error_kind(std::string_view text) {
  try {
    CameoCode::parse(text);
  } catch (const CameoError& e) {
    EXPECT_NE(std::string(e.what()).find(std::string(text)), std::string::npos) << e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error for \"" << text << "\"";
  return CameoErrorKind::kNonNumeric;
}

TEST(CameoCode, ParsesValidCodes) {
  EXPECT_EQ(CameoCode::parse("1411").digits(), "1411");
  EXPECT_EQ(CameoCode::parse("14").digits(), "14");
  EXPECT_EQ(CameoCode::parse("  057 \t").digits(), "057");
}

TEST(CameoCode, TopLevelIsTwoDigitPrefix) {
  EXPECT_EQ(CameoCode::parse("1411").top_level(), 14);
  EXPECT_EQ(CameoCode::parse("142").top_level(), 14);
  EXPECT_EQ(CameoCode::parse("02").top_level(), 2);
  EXPECT_EQ(top_level(CameoCode::parse("20")), 20);
}

TEST(CameoCode, ErrorKinds) {
  EXPECT_EQ(cameo_error_kind("21x"), CameoErrorKind::kNonNumeric);
  EXPECT_EQ(cameo_error_kind("-14"), CameoErrorKind::kNonNumeric);
  EXPECT_EQ(cameo_error_kind("1 4"), CameoErrorKind::kNonNumeric);
  EXPECT_EQ(cameo_error_kind("1"), CameoErrorKind::kBadLength);
  EXPECT_EQ(cameo_error_kind(""), CameoErrorKind::kBadLength);
  EXPECT_EQ(cameo_error_kind("14111"), CameoErrorKind::kBadLength);
  EXPECT_EQ(cameo_error_kind("00"), CameoErrorKind::kTopLevelOutOfRange);
  EXPECT_EQ(cameo_error_kind("21"), CameoErrorKind::kTopLevelOutOfRange);
  EXPECT_EQ(cameo_error_kind("990"), CameoErrorKind::kTopLevelOutOfRange);
}

TEST(QuadClass, ValenceAndRealm) {
  EXPECT_EQ(valence(QuadClass::kMaterialCooperation), Valence::kCooperation);
  EXPECT_EQ(valence(QuadClass::kVerbalConflict), Valence::kConflict);
  EXPECT_EQ(realm(QuadClass::kVerbalConflict), Realm::kVerbal);
  EXPECT_EQ(realm(QuadClass::kMaterialCooperation), Realm::kMaterial);
  for (QuadClass q : kAllQuadClasses) {
    EXPECT_EQ(parse_quad_class(to_string(q)), q);
    EXPECT_EQ(class_from_index(class_index(q)), q);
  }
  EXPECT_FALSE(parse_quad_class("Verbal Cooperation").has_value());
}

TEST(QuadClassMap, DefaultLookups) {
  const auto m = QuadClassMap::default_map();
  EXPECT_EQ(quad_of(CameoCode::parse("1411"), m), QuadClass::kMaterialConflict);
  EXPECT_EQ(quad_of(CameoCode::parse("057"), m), QuadClass::kVerbalCooperation);
  EXPECT_EQ(quad_of(CameoCode::parse("19"), m), QuadClass::kMaterialConflict);
  EXPECT_EQ(m[1], QuadClass::kVerbalCooperation);
  EXPECT_EQ(m[5], QuadClass::kVerbalCooperation);
  EXPECT_EQ(m[6], QuadClass::kMaterialCooperation);
  EXPECT_EQ(m[8], QuadClass::kMaterialCooperation);
  EXPECT_EQ(m[9], QuadClass::kVerbalConflict);
  EXPECT_EQ(m[13], QuadClass::kVerbalConflict);
  EXPECT_EQ(m[14], QuadClass::kMaterialConflict);
  EXPECT_EQ(m[20], QuadClass::kMaterialConflict);
  EXPECT_THROW(m[0], std::out_of_range);
  EXPECT_THROW(m[21], std::out_of_range);
}

TEST(QuadClassMap, PrefixDeterminismOverAllCodes) {
  const auto m = QuadClassMap::default_map();
  for (int n = 100; n < 10000; ++n) {
    std::string text = std::to_string(n);
    if (n < 1000) text = "0" + text;
    for (std::size_t len = 2; len <= 4; ++len) {
      const std::string digits = text.substr(0, len);
      const int top = std::stoi(digits.substr(0, 2));
      if (top < 1 || top > 20) continue;
      EXPECT_EQ(m.quad_of(CameoCode::parse(digits)), m[top]);
    }
  }
}

TEST(QuadClassMap, ShippedFileIsDefaultAndCanonical) {
  const std::string path = std::string(QUADCODE_SOURCE_DIR) + "/data/quadmap.txt";
  const auto m = load_quad_map(path);
  EXPECT_EQ(m, QuadClassMap::default_map());
  EXPECT_EQ(read_file(path), m.serialize());
}

TEST(QuadClassMap, PerCodeLinesWithoutTwentyIsMissing) {
  std::string text;
  for (int top = 1; top <= 19; ++top) {
    text += (top < 10 ? "0" : "") + std::to_string(top) + " " +
            std::string(to_string(QuadClassMap::default_map()[top])) + "\n";
  }
  try {
    QuadClassMap::parse(text);
    FAIL() << "expected MissingTopLevel";
  } catch (const QuadMapError& e) {
    EXPECT_EQ(e.kind(), QuadMapErrorKind::kMissingTopLevel);
    EXPECT_NE(std::string(e.what()).find("code 20"), std::string::npos) << e.what();
  }
  text += "20 material_conflict\n";
  EXPECT_EQ(QuadClassMap::parse(text), QuadClassMap::default_map());
}

TEST(QuadClassMap, DuplicateTopLevel) {
  const std::string text =
      "01-05 verbal_cooperation\n06-08 material_cooperation\n09-13 verbal_conflict\n"
      "14-20 material_conflict\n14 verbal_conflict\n";
  try {
    QuadClassMap::parse(text);
    FAIL() << "expected DuplicateTopLevel";
  } catch (const QuadMapError& e) {
    EXPECT_EQ(e.kind(), QuadMapErrorKind::kDuplicateTopLevel);
    EXPECT_NE(std::string(e.what()).find("code 14"), std::string::npos) << e.what();
  }
}

TEST(QuadClassMap, ParseErrorsNameTheLine) {
  for (const char* text : {"01-05\n", "01-05 cooperation\n", "05-01 verbal_cooperation\n",
                           "00-05 verbal_cooperation\n", "1-21 verbal_cooperation\n",
                           "a-b verbal_cooperation\n"}) {
    try {
      QuadClassMap::parse(std::string("# header\n") + text);
      FAIL() << text;
    } catch (const QuadMapError& e) {
      EXPECT_EQ(e.kind(), QuadMapErrorKind::kParseError) << text;
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
  }
}

TEST(QuadClassMap, RoundTripOfRandomMaps) {
  Rng rng(5);
  testing::TempDir dir("quadmap");
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (int top = 1; top <= 20; ++top) {
      text += std::to_string(top) + " " +
              std::string(to_string(class_from_index(static_cast<int>(rng.below(4))))) + "\n";
    }
    const auto m = QuadClassMap::parse(text);
    const std::string canonical = m.serialize();
    EXPECT_EQ(QuadClassMap::parse(canonical), m);
    m.write(dir.file("m.txt"));
    const auto loaded = load_quad_map(dir.file("m.txt"));
    EXPECT_EQ(loaded, m);
    EXPECT_EQ(loaded.serialize(), canonical);
  }
}

TEST(QuadClassMap, MissingFileIsIoError) {
  EXPECT_THROW(load_quad_map("/nonexistent/quadmap.txt"), IoError);
}

}  // namespace
}  // namespace quadcode
