#include <gtest/gtest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <fstream>

#include "rainsr/checkpoint.hpp"
#include "rainsr/error.hpp"
#include "rainsr/text_format.hpp"
#include "support.hpp"

using namespace rainsr;
using rainsr::testing::random_tensor;
using rainsr::testing::TempDir;

namespace {

Checkpoint small_checkpoint() {
  Checkpoint c;
  c.stage = "dsn";
  c.step = 7;
  c.seed = 42;
  c.config_fingerprint = "00ff";
  c.meta["b"] = "2";
  c.meta["a"] = "x y";
  c.tensors.push_back({"w", random_tensor<float>({2, 3}, 1)});
  c.tensors.push_back({"v", Tensor<float>({1}, 0.5f)});
  return c;
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_str(std::vector<std::uint8_t>& b, const std::string& s) {
  put_u32(b, static_cast<std::uint32_t>(s.size()));
  b.insert(b.end(), s.begin(), s.end());
}

TranslatorSettings tiny_translator() {
  TranslatorSettings s;
  s.generator = NetworkSpec::translator_gen(4, 1);
  s.discriminator = NetworkSpec::patch_disc(4);
  s.buffer_capacity = 2;
  return s;
}

SrnSettings tiny_srn() {
  SrnSettings s;
  s.srn = NetworkSpec::srn(4, 1);
  s.discriminator = NetworkSpec::patch_disc(4);
  return s;
}

DsnSettings tiny_dsn() {
  DsnSettings s;
  s.dsn = NetworkSpec::dsn(4, 1);
  s.discriminator = NetworkSpec::patch_disc(4);
  return s;
}

}  // namespace

TEST(Checkpoint, ByteLayoutMatchesHandEncoding) {
  const Checkpoint c = small_checkpoint();
  std::vector<std::uint8_t> expect;
  const char magic[] = "RAINSRCK";
  expect.insert(expect.end(), magic, magic + 8);
  put_u32(expect, 1);
  put_str(expect, "dsn");
  put_u64(expect, 7);
  put_u64(expect, 42);
  put_str(expect, "00ff");
  put_u32(expect, 2);
  put_str(expect, "a");
  put_str(expect, "x y");
  put_str(expect, "b");
  put_str(expect, "2");
  put_u32(expect, 2);
  for (const auto& t : c.tensors) {
    put_str(expect, t.name);
    put_u32(expect, static_cast<std::uint32_t>(t.value.rank()));
    for (int d : t.value.shape()) put_u32(expect, static_cast<std::uint32_t>(d));
    for (float v : t.value.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(expect, bits);
    }
  }
  put_u64(expect, fnv1a64(expect.data(), expect.size()));
  EXPECT_EQ(serialize(c), expect);
}

TEST(Checkpoint, RoundTripAndByteIdenticalResave) {
  const Checkpoint c = small_checkpoint();
  const auto bytes = serialize(c);
  const Checkpoint back = deserialize(bytes);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize(back), bytes);
  EXPECT_EQ(back.tensor("v")[0], 0.5f);
  EXPECT_EQ(back.meta_value("a"), "x y");
  EXPECT_THROW(back.tensor("nope"), Error);
  EXPECT_FALSE(back.has_tensor("nope"));
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = serialize(small_checkpoint());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize(bad_magic), IoError);
  auto newer = bytes;
  newer[8] = 2;
  EXPECT_THROW(deserialize(newer), VersionError);
  for (std::size_t pos : {std::size_t{14}, bytes.size() / 2, bytes.size() - 9, bytes.size() - 1}) {
    auto flipped = bytes;
    flipped[pos] ^= 0x10;
    EXPECT_THROW(deserialize(flipped), IoError) << pos;
  }
  for (std::size_t len : {std::size_t{0}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + len)), IoError) << len;
  }
  EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

TEST(Checkpoint, TranslatorStateRoundTripIsExact) {
  auto st = TranslatorState::create(tiny_translator(), 3);
  for (int i = 0; i < 3; ++i) {
    train_step_translator(st, random_tensor<float>({2, 3, 16, 16}, 10 + i), random_tensor<float>({2, 3, 16, 16}, 20 + i));
  }
  TempDir dir("ckpt");
  save_checkpoint(to_checkpoint(st, "fp"), dir / "t.ckpt");
  const Checkpoint loaded = load_checkpoint(dir / "t.ckpt");
  EXPECT_EQ(loaded.stage, "translator");
  EXPECT_EQ(loaded.step, 3u);
  EXPECT_EQ(loaded.config_fingerprint, "fp");
  auto back = translator_from_checkpoint(loaded, tiny_translator());
  EXPECT_EQ(back.step, st.step);
  EXPECT_EQ(back.seed, st.seed);
  EXPECT_EQ(back.buffer_rainy, st.buffer_rainy);
  EXPECT_EQ(back.buffer_sunny, st.buffer_sunny);
  EXPECT_EQ(back.opt_g_s2r.step, st.opt_g_s2r.step);
  EXPECT_EQ(back.opt_d_rainy.m, st.opt_d_rainy.m);
  const auto probe = random_tensor<float>({2, 3, 16, 16}, 99);
  EXPECT_EQ(back.g_s2r(probe), st.g_s2r(probe));
  EXPECT_EQ(network_from_checkpoint(loaded, "g_s2r")(probe), st.g_s2r(probe));
  EXPECT_EQ(serialize(to_checkpoint(back, "fp")), serialize(loaded));

  // Continuing from the restored state matches continuing the original.
  const auto s = random_tensor<float>({2, 3, 16, 16}, 30);
  const auto r = random_tensor<float>({2, 3, 16, 16}, 31);
  EXPECT_EQ(train_step_translator(back, s, r).terms(), train_step_translator(st, s, r).terms());
  EXPECT_EQ(serialize(to_checkpoint(back, "fp")), serialize(to_checkpoint(st, "fp")));
}

TEST(Checkpoint, DsnAndSrnRoundTrip) {
  auto d = DsnState::create(tiny_dsn(), 1);
  train_step_dsn(d, random_tensor<float>({1, 3, 32, 32}, 1), random_tensor<float>({1, 3, 8, 8}, 2));
  const Checkpoint dc = deserialize(serialize(to_checkpoint(d, "f")));
  const auto d2 = dsn_from_checkpoint(dc, tiny_dsn());
  const auto probe = random_tensor<float>({1, 3, 32, 32}, 3);
  EXPECT_EQ(d2.dsn(probe), d.dsn(probe));
  EXPECT_EQ(network_from_checkpoint(dc, "d_lr")(probe), d.d_lr(probe));

  auto s = SrnState::create(tiny_srn(), 1);
  const Checkpoint sc = deserialize(serialize(to_checkpoint(s, "f")));
  const auto lr = random_tensor<float>({1, 3, 8, 8}, 4);
  EXPECT_EQ(srn_from_checkpoint(sc, tiny_srn()).srn(lr), s.srn(lr));
  EXPECT_THROW(network_from_checkpoint(sc, "g_s2r"), Error);
}

TEST(Checkpoint, IncompatibleSettingsAreVersionErrors) {
  const auto st = SrnState::create(tiny_srn(), 1);
  const Checkpoint c = to_checkpoint(st, "f");
  SrnSettings other = tiny_srn();
  other.srn = NetworkSpec::srn(8, 1);
  EXPECT_THROW(srn_from_checkpoint(c, other), VersionError);
  EXPECT_THROW(dsn_from_checkpoint(c, tiny_dsn()), VersionError);
}

TEST(Checkpoint, AtomicSaveSurvivesKill) {
  TempDir dir("atomic");
  const auto path = dir / "x.ckpt";
  Checkpoint a = small_checkpoint();
  a.tensors.push_back({"big", random_tensor<float>({256, 1024}, 5)});
  Checkpoint b = a;
  b.step = 8;
  b.tensors.back().value = random_tensor<float>({256, 1024}, 6);
  save_checkpoint(a, path);
  for (int trial = 0; trial < 5; ++trial) {
    const pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
      for (int i = 0;; ++i) save_checkpoint(i % 2 ? a : b, path);
    }
    ::usleep(static_cast<useconds_t>(20000 + 7000 * trial));
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    const Checkpoint got = load_checkpoint(path);
    EXPECT_TRUE(got == a || got == b);
  }
}
