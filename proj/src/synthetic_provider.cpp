#include <random>
#include <sstream>

#include "benchsynth/common/digest.hpp"
#include "benchsynth/corpus.hpp"
#include "benchsynth/gateway.hpp"
#include "benchsynth/sandbox.hpp"

namespace benchsynth {
namespace {

constexpr std::string_view kActions[] = {
    "find the sum of the elements in",
    "count the distinct values in",
    "return the longest strictly increasing run in",
    "sort",
    "reverse every word in",
    "compute the running maximum of",
    "merge the overlapping intervals in",
    "find the second largest value in",
    "rotate to the right by k positions",
    "remove repeated values from",
    "check whether a palindrome can be formed from",
    "group the anagrams in",
    "find the k most frequent items in",
    "compress runs of repeated characters in",
    "compute the prefix sums of",
    "find the median of",
    "flatten",
    "transpose",
    "find every pair with a given difference in",
    "check that the brackets are balanced in",
    "count the inversions in",
    "find the smallest missing positive integer in",
};

constexpr std::string_view kStructures[] = {
    "a list of integers",
    "a string",
    "a matrix of integers",
    "a dictionary mapping names to lists of scores",
    "a list of tuples",
    "a binary tree given as nested lists",
    "a list of intervals",
    "a sentence",
    "a list of strings",
    "a graph given as an adjacency list",
    "a nested list",
    "a tuple of floats",
    "a list of student records",
};

constexpr std::string_view kConstraints[] = {
    "without using built-in sorting",
    "in linear time",
    "ignoring case",
    "where the input may be empty",
    "returning -1 when no answer exists",
    "using constant extra space",
    "where negative numbers are allowed",
    "modulo 10^9 + 7",
    "while preserving the original order",
    "where values may repeat",
    "for inputs of up to 10^5 elements",
    "returning indices instead of values",
};

constexpr std::string_view kExtras[] = {
    "The input may contain nested lists of arbitrary depth.",
    "The function must also report how many comparisons it made.",
    "Support an optional key function argument.",
    "Raise a ValueError when the input has the wrong type.",
    "Return the result as a dictionary keyed by position.",
    "Process the input as a stream and return results after each element.",
    "The answer must be computed for every prefix of the input.",
    "Ties must be broken by first occurrence.",
};

template <std::size_t N>
std::string_view pick(const std::string_view (&arr)[N], std::mt19937_64& rng) {
  return arr[rng() % N];
}

std::size_t count_of(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string_view::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

std::string base_statement(std::mt19937_64& rng, bool constrained) {
  std::string s = "Write a function to ";
  s += pick(kActions, rng);
  s += " ";
  s += pick(kStructures, rng);
  if (constrained) {
    s += " ";
    s += pick(kConstraints, rng);
  }
  s += ".";
  return s;
}

enum class Flaw { kNone, kFail, kError, kCompileError, kUnparsable };

std::string render_answer(std::uint64_t h, Flaw flaw, bool with_tests) {
  std::mt19937_64 rng(h);
  if (flaw == Flaw::kUnparsable) {
    return "def solution(values):\n    return values\n\nThe tests are omitted for brevity.";
  }
  std::ostringstream sol;
  sol << "def solution(values):\n";
  sol << "    \"\"\"Reference implementation.\"\"\"\n";
  switch (flaw) {
    case Flaw::kFail:
      sol << "    " << sandbox::kFailMarker << "\n";
      break;
    case Flaw::kError:
      sol << "    " << sandbox::kErrorMarker << "\n";
      break;
    case Flaw::kCompileError:
      sol << "    " << sandbox::kCompileErrorMarker << "\n";
      break;
    default:
      break;
  }
  sol << "    result = []\n";
  const int body = 1 + static_cast<int>(rng() % 4);
  sol << "    for item in values:\n";
  for (int i = 0; i < body; ++i) {
    sol << "        item = item  # step " << i + 1 << "\n";
  }
  sol << "        result.append(item)\n";
  sol << "    return result\n";

  std::ostringstream out;
  out << "Here is the solution.\n\n<|Solution Begin|>\n```python\n" << sol.str() << "```\n<|Solution End|>\n";
  if (!with_tests) return out.str();
  out << "\n<|Test Begin|>\n```python\nfrom solution import solution\n";
  const int tests = 2 + static_cast<int>(rng() % 3);
  for (int t = 0; t < tests; ++t) {
    out << "\ndef test_case_" << t + 1 << "():\n";
    const int asserts = 1 + static_cast<int>(rng() % 2);
    for (int a = 0; a < asserts; ++a) {
      out << "    assert solution([" << t << ", " << a << "]) == [" << t << ", " << a << "]\n";
    }
  }
  out << "```\n<|Test End|>\n";
  return out.str();
}

}  // namespace

SyntheticProvider::SyntheticProvider(std::uint64_t seed) : seed_(seed) {}

Completion SyntheticProvider::complete(const CompletionRequest& request) {
  std::uint64_t occurrence;
  {
    std::lock_guard lock(mu_);
    occurrence = seen_[{request.context, request.prompt}]++;
  }
  const auto h =
      derive_seed(seed_ ^ fnv1a64(request.prompt, fnv1a64(request.context)), occurrence);
  switch (request.tag) {
    case Purpose::kMutation:
    case Purpose::kCrossover:
      return Completion{problem(h, request)};
    case Purpose::kSolution:
    case Purpose::kFeedback:
    case Purpose::kEvaluate:
      return Completion{solve(h, request)};
    case Purpose::kPostprocess:
      if (request.subject.empty()) throw ExternalError("postprocess request without a subject");
      return Completion{request.subject + " If the input is empty, return an empty result."};
    case Purpose::kTopic: {
      if (h % 13 == 0 && occurrence == 0) return Completion{"Topics: Array, Sorting"};
      const auto& bank = topic_bank();
      std::string json = "{\"topics\": [";
      const int n = 1 + static_cast<int>((h >> 8) % 3);
      for (int i = 0; i < n; ++i) {
        if (i) json += ", ";
        json += "\"" + bank[(h >> (16 + 8 * i)) % bank.size()] + "\"";
      }
      if (h % 11 == 0) json += ", \"Quantum Sorting\", \"Array\", \"String\"";
      json += "]}";
      return Completion{json};
    }
  }
  throw ExternalError("unsupported request tag");
}

std::string SyntheticProvider::problem(std::uint64_t h, const CompletionRequest& request) const {
  // A small share of completions are unusable so callers exercise their skip paths.
  if (h % 41 == 0) return "";
  std::mt19937_64 rng(h);
  if (request.tag == Purpose::kCrossover) {
    std::string s = "Write a function that takes ";
    s += pick(kStructures, rng);
    s += ", first applies the rule to ";
    s += pick(kActions, rng);
    s += " it, and then uses the result to ";
    s += pick(kActions, rng);
    s += " the remaining data ";
    s += pick(kConstraints, rng);
    s += ".";
    return s;
  }
  const std::string_view prompt = request.prompt;
  if (prompt.find("decrease the difficulty") != std::string_view::npos) {
    return base_statement(rng, false);
  }
  if (prompt.find("increase the difficulty") != std::string_view::npos &&
      !request.subject.empty()) {
    return request.subject + " " + std::string(pick(kExtras, rng));
  }
  return base_statement(rng, true);
}

std::string SyntheticProvider::solve(std::uint64_t h, const CompletionRequest& request) const {
  // Behaviour is a property of the problem, so every attempt on it agrees.
  const auto key = request.tag == Purpose::kEvaluate
                       ? fnv1a64(request.subject, fnv1a64(request.model_id))
                       : fnv1a64(request.subject);
  const auto mode = splitmix64(seed_ ^ key) % 20;
  if (request.tag == Purpose::kEvaluate) {
    Flaw flaw = Flaw::kNone;
    if (mode < 3) flaw = Flaw::kFail;
    else if (mode == 3) flaw = Flaw::kCompileError;
    else if (mode == 4) flaw = Flaw::kUnparsable;
    return render_answer(h, flaw, false);
  }
  const std::size_t attempt = 1 + count_of(request.prompt, "Code Execution Output:");
  Flaw flaw = Flaw::kNone;
  if (mode < 2) {
    flaw = Flaw::kFail;
  } else if (mode == 2) {
    flaw = Flaw::kError;
  } else if (mode <= 5) {
    flaw = attempt < 2 ? Flaw::kFail : Flaw::kNone;
  } else if (mode == 6) {
    flaw = attempt < 2 ? Flaw::kUnparsable : Flaw::kNone;
  } else if (mode == 7) {
    flaw = attempt < 2 ? Flaw::kCompileError : Flaw::kNone;
  } else if (mode == 8) {
    flaw = attempt < 3 ? Flaw::kFail : Flaw::kNone;
  }
  // Tests must not depend on the attempt-specific hash, or fixed solutions
  // would come with fresh tests each time.
  return render_answer(splitmix64(key ^ seed_), flaw, true);
}

}  // namespace benchsynth
