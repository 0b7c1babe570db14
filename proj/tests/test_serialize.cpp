#include <gtest/gtest.h>

#include <sstream>

#include "debias/model.hpp"
#include "debias/network.hpp"
#include "debias/serialize.hpp"
#include "test_util.hpp"

using namespace debias;

namespace {

Tagger small_tagger(std::uint64_t seed = 7) {
  Tagger m;
  m.vocab = build_vocab({{"the", "dog", "barks", "."}, {"a", "cat", "sleeps", "."}});
  m.gold_tags = TagSet({"DET", "NOUN", "VERB", "."});
  m.proj_tags = TagSet({"DET", "NOUN", "VERB", ".", "X"});
  m.params = init_params({m.vocab.size(), 5, 4, 4, 5}, seed);
  m.params.A(2, 4) = -0.375;
  return m;
}

std::string to_bytes(const Tagger& m) {
  std::ostringstream os(std::ios::binary);
  save_model(m, os);
  return os.str();
}

Tagger from_bytes(const std::string& s) {
  std::istringstream is(s, std::ios::binary);
  return load_model(is);
}

}  // namespace

TEST(ModelFile, RoundTripIsBitExact) {
  const Tagger m = small_tagger();
  test::TempDir dir;
  save_model(m, dir.file("m.bin"));
  const Tagger back = load_model(dir.file("m.bin"));
  EXPECT_EQ(back.vocab, m.vocab);
  EXPECT_EQ(back.gold_tags, m.gold_tags);
  EXPECT_EQ(back.proj_tags, m.proj_tags);
  EXPECT_TRUE(identical(back.params, m.params));
  EXPECT_EQ(to_bytes(back), to_bytes(m));
  const std::vector<std::string> sentence{"the", "cat", "zzz", "."};
  EXPECT_EQ(predict(back, sentence), predict(m, sentence));
}

TEST(ModelFile, TruncatedFileIsRejected) {
  const std::string bytes = to_bytes(small_tagger());
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, bytes.size() / 3, bytes.size() - 1})
    EXPECT_THROW(from_bytes(bytes.substr(0, cut)), ModelFormatError) << "cut at " << cut;
}

TEST(ModelFile, WrongMagicIsRejected) {
  std::string bytes = to_bytes(small_tagger());
  bytes[10] ^= 0x20;  // inside the magic string
  EXPECT_THROW(from_bytes(bytes), ModelFormatError);
}

TEST(ModelFile, WrongTagsetSizeIsRejected) {
  Tagger m = small_tagger();
  m.gold_tags = TagSet({"DET", "NOUN", "VERB"});  // params still have four gold rows
  EXPECT_THROW(from_bytes(to_bytes(m)), ModelFormatError);
}

TEST(ModelFile, MissingFileIsIoError) {
  EXPECT_THROW(load_model(std::string("/nonexistent/model.bin")), IoError);
}
