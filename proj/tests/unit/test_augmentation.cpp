#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "healthcam/augmentation.hpp"
#include "oracles.hpp"

using namespace healthcam;

namespace {

ImageTensor numbered(std::size_t h, std::size_t w, std::size_t c) {
  ImageTensor t({h, w, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  return t;
}

LabeledSample sample(std::size_t h, std::size_t w, double tag) {
  PollutantVector label;
  for (std::size_t i = 0; i < kPollutantCount; ++i) label[i] = tag + 0.1 * static_cast<double>(i);
  return {numbered(h, w, 3), label, "s" + std::to_string(static_cast<int>(tag))};
}

}  // namespace

// Every size up to 12x12x3, checked cell by cell against the definitions.
TEST(Augmentation, MirrorAndReflectMatchDefinitionsExhaustively) {
  for (std::size_t h = 1; h <= 12; ++h)
    for (std::size_t w = 1; w <= 12; ++w)
      for (std::size_t c = 1; c <= 3; ++c) {
        const auto img = numbered(h, w, c);
        const auto m = mirror(img);
        const auto r = reflect_horizontal(img);
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j)
            for (std::size_t k = 0; k < c; ++k) {
              ASSERT_EQ(m.at(i, j, k), img.at(h - 1 - i, j, k));
              ASSERT_EQ(r.at(i, j, k), img.at(i, w - 1 - j, k));
            }
        ASSERT_EQ(mirror(m), img) << "mirror is an involution";
        ASSERT_EQ(reflect_horizontal(r), img) << "reflection is an involution";
        ASSERT_EQ(mirror(r), reflect_horizontal(m)) << "the two flips commute";
      }
}

TEST(Augmentation, SplitPartitionsRowsExhaustively) {
  for (std::size_t h = 2; h <= 25; ++h)
    for (std::size_t w = 1; w <= 6; ++w) {
      const auto img = numbered(h, w, 3);
      const auto halves = split_vertical(img);
      ASSERT_EQ(halves.left.dim(0), (h + 1) / 2);
      ASSERT_EQ(halves.right.dim(0), h / 2);
      ASSERT_EQ(halves.left.dim(1), w);
      // Concatenating the halves gives back the original pixels in order.
      std::vector<float> joined(halves.left.values().begin(), halves.left.values().end());
      joined.insert(joined.end(), halves.right.values().begin(), halves.right.values().end());
      ASSERT_TRUE(std::equal(joined.begin(), joined.end(), img.values().begin(), img.values().end()));
    }
}

TEST(Augmentation, SplitRejectsSingleRow) { EXPECT_THROW(split_vertical(numbered(1, 5, 3)), std::invalid_argument); }

TEST(Augmentation, VerticalPolicyQuadruplesAndPreservesLabels) {
  for (std::size_t n = 1; n <= 20; ++n) {
    std::vector<LabeledSample> in;
    for (std::size_t i = 0; i < n; ++i) in.push_back(sample(4 + i % 5, 3 + i % 4, static_cast<double>(i)));
    const auto out = augment_dataset(in, policy_from_name("vertical", n));
    ASSERT_EQ(out.size(), 4 * in.size());
    std::map<std::string, int> per_source;
    for (const auto& s : out) {
      const std::string src = s.id.substr(0, s.id.find('/'));
      const auto it = std::find_if(in.begin(), in.end(), [&](const LabeledSample& x) { return x.id == src; });
      ASSERT_NE(it, in.end());
      ASSERT_EQ(s.label, it->label) << "labels are copied verbatim";
      ++per_source[src];
    }
    for (const auto& [src, count] : per_source) ASSERT_EQ(count, 4) << src;
  }
}

TEST(Augmentation, DerivedImagesInFixedOrder) {
  const auto s = sample(5, 4, 1);
  const auto out = augment_sample(s, policy_from_name("vertical", 0));
  ASSERT_EQ(out.size(), 4u);
  const auto halves = split_vertical(s.image);
  EXPECT_EQ(out[0].image, halves.left);
  EXPECT_EQ(out[1].image, halves.right);
  EXPECT_EQ(out[2].image, mirror(halves.left));
  EXPECT_EQ(out[3].image, mirror(halves.right));
  EXPECT_EQ(out[2].id, "s1/top/mirror");
}

TEST(Augmentation, PolicyMultiplicities) {
  const auto s = sample(6, 6, 2);
  EXPECT_EQ(augment_sample(s, policy_from_name("none", 0)).size(), 1u);
  EXPECT_EQ(augment_sample(s, policy_from_name("vertical", 0)).size(), 4u);
  EXPECT_EQ(augment_sample(s, policy_from_name("horizontal", 0)).size(), 1u);
  EXPECT_EQ(augment_sample(s, policy_from_name("vertical+horizontal", 0)).size(), 8u);
  EXPECT_EQ(augment_sample(s, policy_from_name("vertical", 0, true)).size(), 5u);
  EXPECT_EQ(augment_sample(s, policy_from_name("horizontal", 0, true)).size(), 2u);
  for (const char* name : {"none", "vertical", "horizontal", "vertical+horizontal"}) {
    const auto p = policy_from_name(name, 0);
    EXPECT_EQ(augment_sample(s, p).size(), p.multiplicity()) << name;
  }
}

TEST(Augmentation, HorizontalArmReflectsEveryVerticalOutput) {
  const auto s = sample(6, 5, 3);
  const auto out = augment_sample(s, policy_from_name("vertical+horizontal", 0));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[4 + i].image, reflect_horizontal(out[i].image));
}

TEST(Augmentation, ShuffleIsSeededAndPermutes) {
  std::vector<LabeledSample> in;
  for (int i = 0; i < 30; ++i) in.push_back(sample(4, 4, i));
  const auto a = augment_dataset(in, policy_from_name("vertical", 5));
  const auto b = augment_dataset(in, policy_from_name("vertical", 5));
  const auto c = augment_dataset(in, policy_from_name("vertical", 6));
  std::vector<std::string> ia, ib, ic;
  for (const auto& s : a) ia.push_back(s.id);
  for (const auto& s : b) ib.push_back(s.id);
  for (const auto& s : c) ic.push_back(s.id);
  EXPECT_EQ(ia, ib);
  EXPECT_NE(ia, ic);
  std::sort(ia.begin(), ia.end());
  std::sort(ic.begin(), ic.end());
  EXPECT_EQ(ia, ic);
}

TEST(Augmentation, RejectsBadInput) {
  EXPECT_THROW(augment_dataset({}, policy_from_name("vertical", 0)), std::invalid_argument);
  EXPECT_THROW(policy_from_name("diagonal", 0), std::invalid_argument);
  AugmentationPolicy empty;
  empty.enable_vertical = false;
  EXPECT_THROW(augment_dataset({sample(4, 4, 1)}, empty), std::invalid_argument);
}
