#include "benchsynth/prompts.hpp"

#include "benchsynth/assets.hpp"
#include "benchsynth/common/errors.hpp"

namespace benchsynth::prompts {

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasier:
      return "easier";
    case Difficulty::kEqual:
      return "equal";
    case Difficulty::kHarder:
      return "harder";
  }
  return "equal";
}

Difficulty parse_difficulty(std::string_view s) {
  if (s == "easier") return Difficulty::kEasier;
  if (s == "equal") return Difficulty::kEqual;
  if (s == "harder") return Difficulty::kHarder;
  throw ConfigError("unknown mutation difficulty: " + std::string(s));
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string mutation(Difficulty d, std::string_view question) {
  std::string name = "prompts/mutation_" + std::string(to_string(d)) + ".txt";
  return render(asset(name), {{"instruction", std::string(question)}});
}

std::string crossover(std::span<const std::string> questions) {
  std::string block;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    block += "Question " + std::to_string(i + 1) + ":\n" + questions[i] + "\n\n";
  }
  return render(asset("prompts/crossover.txt"), {{"questions", block}});
}

std::string solution(std::string_view problem) {
  return render(asset("prompts/solution.txt"), {{"problem", std::string(problem)}});
}

std::string output_format() {
  const std::string_view base = asset("prompts/solution.txt");
  constexpr std::string_view kStart = "## Output Format:\n";
  constexpr std::string_view kEnd = "## Question:";
  const auto a = base.find(kStart);
  const auto b = base.find(kEnd);
  std::string section(base.substr(a + kStart.size(), b - a - kStart.size()));
  while (!section.empty() && section.back() == '\n') section.pop_back();
  return section;
}

std::string solution_feedback(std::string_view problem, std::span<const Attempt> history) {
  std::string chat;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto n = std::to_string(i + 1);
    if (i) chat += "\n";
    chat += "Attempt " + n + " Solution:\n" + history[i].solution + "\n\n";
    chat += "Attempt " + n + " Code Execution Output:\n" + history[i].output + "\n";
  }
  return render(asset("prompts/solution_feedback.txt"),
                {{"output_format", output_format()},
                 {"chat_history", chat},
                 {"problem", std::string(problem)}});
}

std::string postprocess(std::string_view question, std::string_view tests) {
  return render(asset("prompts/postprocess.txt"),
                {{"question", std::string(question)}, {"tests", std::string(tests)}});
}

std::string topic_labeling(std::string_view problem, std::string_view solution) {
  return render(asset("prompts/topic_labeling.txt"),
                {{"problem", std::string(problem)}, {"solution", std::string(solution)}});
}

std::string testtaker(std::string_view problem) {
  return render(asset("prompts/testtaker.txt"), {{"problem", std::string(problem)}});
}

}  // namespace benchsynth::prompts
