#pragma once

#include <algorithm>
#include <chrono>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <thread>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "latent_evo/error.hpp"
#include "latent_evo/image.hpp"
#include "latent_evo/latent.hpp"
#include "latent_evo/rng.hpp"

namespace latent_evo {

/// Black-box map from latent to image. Implementations must be deterministic
/// and safe to call concurrently from several threads.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual Image generate(const LatentTensor& z) const = 0;
  virtual LatentShape latent_shape() const = 0;
};

/// Seeded random linear decoder followed by a 3x3 box blur and a logistic
/// squashing to 8 bits. Deterministic in (latent, seed).
class ToyDecoder final : public Generator {
 public:
  ToyDecoder(LatentShape shape, std::uint32_t width, std::uint32_t height, std::uint64_t seed,
             bool blur = true)
      : shape_(shape), width_(width), height_(height), blur_(blur) {
    shape_.validate();
    if (width < 1 || height < 1) throw BadConfig("decoder resolution must be positive");
    const std::size_t rows = std::size_t{3} * width * height;
    weights_.resize(rows * shape_.size());
    SeededRng rng(seed, streams::kDecoder);
    for (auto& w : weights_) w = static_cast<float>(rng.gaussian());
  }

  LatentShape latent_shape() const override { return shape_; }
  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }

  Image generate(const LatentTensor& z) const override {
    if (z.shape() != shape_) throw ShapeMismatch("latent shape does not match decoder");
    const std::size_t d = shape_.size();
    const std::size_t plane = std::size_t{width_} * height_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const auto zv = z.values();

    std::vector<double> field(3 * plane);
    for (std::size_t r = 0; r < field.size(); ++r) {
      const float* row = &weights_[r * d];
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += static_cast<double>(row[k]) * zv[k];
      field[r] = acc * scale;
    }
    if (blur_) field = box_blur(field);

    Image img(width_, height_);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < height_; ++y)
        for (std::size_t x = 0; x < width_; ++x) {
          const double v = field[c * plane + y * width_ + x];
          const double squashed = 255.0 / (1.0 + std::exp(-2.0 * v));
          img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(squashed), 0L, 255L));
        }
    return img;
  }

 private:
  // Radius-1 box filter per channel; windows are truncated at the borders.
  std::vector<double> box_blur(const std::vector<double>& in) const {
    const std::size_t w = width_, h = height_, plane = w * h;
    std::vector<double> out(in.size());
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double sum = 0.0;
          int count = 0;
          for (std::size_t yy = y ? y - 1 : 0; yy <= std::min(h - 1, y + 1); ++yy)
            for (std::size_t xx = x ? x - 1 : 0; xx <= std::min(w - 1, x + 1); ++xx) {
              sum += in[c * plane + yy * w + xx];
              ++count;
            }
          out[c * plane + y * w + x] = sum / count;
        }
    return out;
  }

  LatentShape shape_;
  std::uint32_t width_;
  std::uint32_t height_;
  bool blur_;
  std::vector<float> weights_;
};

/// Runs an external command per latent: LEVO container on stdin, P6 PPM on
/// stdout, exit status 0 required.
class SubprocessGenerator final : public Generator {
 public:
  SubprocessGenerator(LatentShape shape, std::uint32_t width, std::uint32_t height,
                      std::vector<std::string> command, std::chrono::milliseconds timeout)
      : shape_(shape), width_(width), height_(height), command_(std::move(command)),
        timeout_(timeout) {
    shape_.validate();
    if (command_.empty()) throw BadConfig("subprocess generator needs a command");
    std::signal(SIGPIPE, SIG_IGN);
  }

  LatentShape latent_shape() const override { return shape_; }

  Image generate(const LatentTensor& z) const override {
    if (z.shape() != shape_) throw ShapeMismatch("latent shape does not match generator");
    const auto output = run_child(encode_latent(z));
    Image img = decode_ppm(output);
    if (img.width != width_ || img.height != height_)
      throw MalformedOutput("child produced " + std::to_string(img.width) + "x" +
                            std::to_string(img.height) + ", expected " + std::to_string(width_) +
                            "x" + std::to_string(height_));
    return img;
  }

 private:
  std::vector<std::uint8_t> run_child(const std::vector<std::uint8_t>& input) const {
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw GeneratorError("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw GeneratorError("pipe failed");
    }

    std::vector<char*> argv;
    for (const auto& a : command_) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      throw GeneratorError("fork failed");
    }
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execvp(argv[0], argv.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    int in_fd = to_child[1];
    const int out_fd = from_child[0];
    ::fcntl(in_fd, F_SETFL, O_NONBLOCK);
    ::fcntl(out_fd, F_SETFL, O_NONBLOCK);

    std::vector<std::uint8_t> output;
    std::size_t written = 0;
    bool timed_out = false;
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::uint8_t buf[65536];
    for (;;) {
      pollfd fds[2];
      nfds_t nfds = 0;
      fds[nfds++] = {out_fd, POLLIN, 0};
      if (in_fd >= 0) fds[nfds++] = {in_fd, POLLOUT, 0};
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        timed_out = true;
        break;
      }
      const int ready = ::poll(fds, nfds, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        break;
      }
      if (ready == 0) continue;
      if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
        const ssize_t n = ::write(in_fd, input.data() + written, input.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN && errno != EINTR) written = input.size();  // child closed stdin
        if (written == input.size()) {
          ::close(in_fd);
          in_fd = -1;
        }
      }
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        const ssize_t n = ::read(out_fd, buf, sizeof buf);
        if (n > 0) {
          output.insert(output.end(), buf, buf + n);
        } else if (n == 0) {
          break;
        } else if (errno != EAGAIN && errno != EINTR) {
          break;
        }
      }
    }
    if (in_fd >= 0) ::close(in_fd);
    ::close(out_fd);

    int status = 0;
    while (!timed_out) {
      const pid_t done = ::waitpid(pid, &status, WNOHANG);
      if (done == pid || (done < 0 && errno != EINTR)) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        timed_out = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    if (timed_out) {
      ::kill(pid, SIGKILL);
      while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
    }
    if (timed_out)
      throw Timeout("generator command timed out after " + std::to_string(timeout_.count()) + " ms");
    if (!WIFEXITED(status))
      throw ChildFailed(-1, "generator command was terminated by a signal");
    if (WEXITSTATUS(status) != 0)
      throw ChildFailed(WEXITSTATUS(status), "generator command exited with status " +
                                                 std::to_string(WEXITSTATUS(status)));
    return output;
  }

  LatentShape shape_;
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<std::string> command_;
  std::chrono::milliseconds timeout_;
};

}  // namespace latent_evo
