#!/usr/bin/env python3
# Copyright 2026 The duetmath Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the replay fixture: ten level-5 problems and a reply script.

The script holds, for every (mode, problem), the dialogue both agents will
"say". `regenerate_replay.sh` feeds it to the scripted backend while
recording, which produces the bundled cassettes.

Expected accuracy per mode (one run): single_agent 5/10, teacher_student
6/10, peer_to_peer 7/10, critical_debate 6/10, reciprocal_peer 5/10.
"""

import json
import pathlib

HERE = pathlib.Path(__file__).resolve().parent

# id, subject label, statement, solution, correct answer surface form,
# an equivalent alternative form, a wrong answer, a hint and a work line.
PROBLEMS = [
    ("algebra", "1", "Algebra",
     "Find the sum of all real values of $x$ such that $x^2 - 7x + 10 = 0$.",
     "The quadratic factors as $(x-2)(x-5) = 0$, so the roots are $2$ and $5$ and their sum is $\\boxed{7}$.",
     "7", "7.0", "10",
     "Notice that the constant term and the middle coefficient suggest a factorization.",
     "The quadratic factors as $(x-2)(x-5)=0$, so the roots are $2$ and $5$."),
    ("algebra", "2", "Algebra",
     "What is the value of $\\dfrac{2^{10} - 2^8}{2^7}$?",
     "Factor $2^8$ from the numerator: $\\frac{2^8(4-1)}{2^7} = 2 \\cdot 3 = \\boxed{6}$.",
     "6", "6", "8",
     "Consider factoring the largest common power of two out of the numerator.",
     "Factoring gives $2^8(2^2 - 1) = 3 \\cdot 2^8$, and dividing by $2^7$ leaves $2 \\cdot 3$."),
    ("counting_and_probability", "1", "Counting & Probability",
     "Two fair six-sided dice are rolled. What is the probability that the sum of the numbers rolled is $7$?",
     "Six of the $36$ equally likely outcomes sum to $7$, so the probability is $\\boxed{\\frac{1}{6}}$.",
     "\\frac{1}{6}", "\\dfrac16", "\\frac{5}{36}",
     "Think about how many ordered pairs of faces add up to the target.",
     "The pairs $(1,6),(2,5),(3,4),(4,3),(5,2),(6,1)$ give six of the $36$ outcomes."),
    ("counting_and_probability", "2", "Counting & Probability",
     "In how many ways can four distinct books be arranged on a shelf if two particular books must be next to each other?",
     "Glue the two books into one block: $3! \\cdot 2! = \\boxed{12}$.",
     "12", "12", "24",
     "Perhaps treat the two books that must stay together as a single object.",
     "Treating the pair as one block gives $3! = 6$ orders, and the pair itself can be ordered in $2$ ways."),
    ("geometry", "1", "Geometry",
     "A right triangle has legs of length $6$ and $8$. What is the length of the altitude to the hypotenuse?",
     "The hypotenuse is $10$ and the area is $24$, so the altitude is $\\frac{2 \\cdot 24}{10} = \\boxed{\\frac{24}{5}}$.",
     "\\frac{24}{5}", "4.8", "5",
     "Consider computing the area of the triangle in two different ways.",
     "The area is $\\frac{1}{2} \\cdot 6 \\cdot 8 = 24$ and the hypotenuse is $10$, so $\\frac{1}{2} \\cdot 10 \\cdot h = 24$."),
    ("intermediate_algebra", "1", "Intermediate Algebra",
     "Find the ordered pair $(a,b)$ such that the polynomial $x^2 + ax + b$ has roots $2$ and $-5$.",
     "By Vieta, $a = -(2 + (-5)) = 3$ and $b = 2 \\cdot (-5) = -10$, so $(a,b) = \\boxed{(3,-10)}$.",
     "(3,-10)", "\\left(3, -10\\right)", "(-3,-10)",
     "Recall how the coefficients of a monic quadratic relate to the sum and product of its roots.",
     "The sum of the roots is $-3 = -a$ and the product is $-10 = b$."),
    ("number_theory", "1", "Number Theory",
     "What is the remainder when $3^{100}$ is divided by $7$?",
     "Since $3^6 \\equiv 1 \\pmod 7$ and $100 = 6 \\cdot 16 + 4$, we get $3^{100} \\equiv 3^4 = 81 \\equiv \\boxed{4}$.",
     "4", "$4$", "1",
     "Consider the cycle of powers of $3$ modulo $7$.",
     "The powers of $3$ modulo $7$ repeat with period $6$, and $100$ leaves remainder $4$ on division by $6$, so we need $3^4 = 81$."),
    ("number_theory", "2", "Number Theory",
     "What is the sum of the positive divisors of $36$?",
     "With $36 = 2^2 3^2$ the divisor sum is $(1+2+4)(1+3+9) = \\boxed{91}$.",
     "91", "91", "55",
     "Notice that the divisor sum is multiplicative over the prime factorization.",
     "Since $36 = 2^2 \\cdot 3^2$, the sum is $(1+2+4)(1+3+9) = 7 \\cdot 13$."),
    ("prealgebra", "1", "Prealgebra",
     "Express $0.25 \\times 0.4$ as a common fraction.",
     "$0.25 \\times 0.4 = \\frac{1}{4} \\cdot \\frac{2}{5} = \\boxed{\\frac{1}{10}}$.",
     "\\frac{1}{10}", "0.1", "\\frac{1}{100}",
     "Consider rewriting each decimal as a fraction first.",
     "We have $0.25 = \\frac{1}{4}$ and $0.4 = \\frac{2}{5}$, and the product is $\\frac{2}{20}$."),
    ("precalculus", "1", "Precalculus",
     "Compute $\\cos^2 15^\\circ - \\sin^2 15^\\circ$.",
     "By the double-angle formula this is $\\cos 30^\\circ = \\boxed{\\frac{\\sqrt{3}}{2}}$.",
     "\\frac{\\sqrt{3}}{2}", "\\frac{\\sqrt3}{2}", "\\frac{1}{2}",
     "Recall the double-angle identity for cosine.",
     "The expression equals $\\cos 30^\\circ$ by the double-angle identity."),
]

# Outcome per problem index: "ok" = correct answer, "alt" = correct answer in
# another surface form, "wrong" = wrong answer, "none" = no final answer.
PLAN = {
    "single_agent":    ["ok", "alt", "wrong", "ok", "none", "ok", "wrong", "alt", "wrong", "none"],
    "teacher_student": ["ok", "alt", "ok", "wrong", "ok", "none", "ok", "wrong", "alt", "wrong"],
    "peer_to_peer":    ["ok", "ok", "alt", "ok", "alt", "wrong", "ok", "ok", "none", "wrong"],
    "critical_debate": ["alt", "wrong", "ok", "ok", "ok", "alt", "none", "wrong", "ok", "wrong"],
    "reciprocal_peer": ["ok", "wrong", "alt", "none", "ok", "ok", "wrong", "alt", "wrong", "none"],
}


def final(answer):
    return "FINAL ANSWER: \\boxed{%s}" % answer


def answer_for(outcome, problem):
    return {"ok": problem[5], "alt": problem[6], "wrong": problem[7]}.get(outcome)


def single_agent(problem, outcome):
    work = problem[9]
    if outcome == "none":
        return [f"Let's solve this step by step.\n\n{work}\n\nI am not fully certain how to finish, so I will stop here."]
    return [f"Let's solve this step by step.\n\n{work}\n\n{final(answer_for(outcome, problem))}"]


def teacher_student(problem, outcome):
    hint, work = problem[8], problem[9]
    teacher = [
        f"Let's read the problem carefully together. {hint} What is the first quantity you would compute?",
        "Good start. Check each step before moving on. What does that give you?",
        "Nice reasoning! Now state your result clearly and explain why it answers the question.",
    ]
    student = [
        f"Thank you for the hint. {work} Is that right?",
        "I see. Let me finish the computation carefully.",
    ]
    if outcome == "none":
        replies = []
        for i in range(6):
            replies.append(teacher[min(i, 1)])
            replies.append("I am still not sure how to proceed. Could you give me another hint?")
        return replies
    return [teacher[0], student[0], teacher[1],
            f"{student[1]}\n\n{work}\n\n{final(answer_for(outcome, problem))}"]


def peer_to_peer(problem, outcome):
    hint, work = problem[8], problem[9]
    if outcome == "none":
        return ["I think we should split the work. " + hint,
                "I agree. What do you think about checking small cases first?"]
    if outcome == "wrong":
        return [f"I think we should start from the definitions. {hint}",
                f"Good point. Here is my computation.\n\n{final(answer_for(outcome, problem))}"]
    return [f"I think we should start from the definitions. {hint}",
            f"Good point. {work} What do you think?",
            f"I agree with your computation and I checked it independently.\n\n{final(answer_for(outcome, problem))}"]


def critical_debate(problem, outcome):
    hint, work = problem[8], problem[9]
    wrong = problem[7]
    if outcome == "none":
        return [f"My proposed answer is ${wrong}$. {hint}",
                "I disagree, that is wrong. Have you checked every case?"]
    return [f"My proposed answer is ${wrong}$ based on a quick estimate.",
            f"That is incorrect. {hint} {work}",
            "Thanks for the correction. Your derivation holds up under my own check.",
            f"Then we agree on the reasoning.\n\n{final(answer_for(outcome, problem))}"]


def reciprocal_peer(problem, outcome):
    hint, work = problem[8], problem[9]
    if outcome == "none":
        return [f"I will explain first. {hint}",
                "I follow so far. Can you explain the next step again?"]
    return [f"I will explain first. {hint}",
            f"Thank you, that makes the idea clear. {work} Is this correct?",
            "Your turn to teach me the last step. Why does this finish the problem?",
            f"Because every case is covered, the computation is complete.\n\n{final(answer_for(outcome, problem))}"]


BUILDERS = {
    "single_agent": single_agent,
    "teacher_student": teacher_student,
    "peer_to_peer": peer_to_peer,
    "critical_debate": critical_debate,
    "reciprocal_peer": reciprocal_peer,
}


def main():
    math_dir = HERE / "math"
    for problem in PROBLEMS:
        subject, stem, label, statement, solution = problem[:5]
        path = math_dir / subject / f"{stem}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        record = {"problem": statement, "level": "Level 5", "type": label, "solution": solution}
        path.write_text(json.dumps(record, indent=2) + "\n")

    sessions = {}
    expected = {}
    for mode, outcomes in PLAN.items():
        expected[mode] = sum(o in ("ok", "alt") for o in outcomes)
        for problem, outcome in zip(PROBLEMS, outcomes):
            sessions[f"{mode}/{problem[0]}/{problem[1]}"] = BUILDERS[mode](problem, outcome)
    script = {"default": [], "sessions": sessions}
    (HERE / "replay").mkdir(exist_ok=True)
    (HERE / "replay" / "script.json").write_text(json.dumps(script, indent=2, sort_keys=True) + "\n")
    (HERE / "replay" / "expected_correct.json").write_text(json.dumps(expected, indent=2) + "\n")


if __name__ == "__main__":
    main()
