"""Regenerate the golden case fixtures under src/agentrag/fixtures/.

Each case directory gets:

  corpus.jsonl      10 passages (id, title, text)
  embeddings.json   lookup embedder table: one-hot passage vectors, queries
                    weighted 5..1 over their intended top-5 so the ranking is exact
  script.jsonl      scripted model responses, specific entries first, catch-alls last
  engine.ini        config wiring the above together
  case.json         expected plan, per-step tasks / doc ids / answers, final answer

Passages marked ``stand_in`` are short placeholders written for the fixture;
their content only has to agree with the notes extracted from them.

    python scripts/make_case_fixtures.py
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "src" / "agentrag" / "fixtures"
DIM = 16

SENTINEL = "No related information from this document."


def qa(analysis: str, answer: str, rating: int = 5) -> str:
    return json.dumps({"analysis": analysis, "answer": answer, "success": "yes", "rating": rating}, ensure_ascii=False)


def notes(*items: str) -> str:
    return json.dumps(list(items), ensure_ascii=False)


CASES = {
    "oxford": {
        "question": "Who is Edward De Vere, 17Th Earl Of Oxford's paternal grandfather?",
        "gold": ["John de Vere, 15th Earl of Oxford"],
        "analysis": "The question asks for a paternal grandfather, which is the father of the father. "
        "First find the 17th Earl's father, then that man's father.",
        "plan": [
            "Identify Edward De Vere, 17th Earl of Oxford's father",
            "Determine the name of Edward De Vere, 17th Earl of Oxford's paternal grandfather based on the father's name.",
        ],
        "passages": {
            "129772": ("Edward de Vere, 17th Earl of Oxford", "Edward de Vere, 17th Earl of Oxford Edward de Vere, 17th Earl of Oxford (; 12 April 155024 June 1604) was an English peer and courtier of the Elizabethan era. Oxford was heir to the second oldest earldom in the kingdom, a court favourite for a time,", False),
            "6127861": ("John de Vere, 16th Earl of Oxford", "son, Edward de Vere, 17th Earl of Oxford, and a daughter, Mary de Vere. Margery died on 2 December 1568. After his death in Oxford, he was buried in Castle Hedingham, Essex, on 31 August 1562. The Earl was known as a sportsman,", False),
            "129773": ("Edward de Vere, 17th Earl of Oxford", "proposed for the authorship of Shakespeare's works. De Vere was the only son of John de Vere, 16th Earl of Oxford, and Margery Golding. After the death of his father in 1562, he became a ward of Queen Elizabeth and was sent to live in the household", False),
            "14010350": ("Earl of Oxford", "Earl of Oxford The title Earl of Oxford was held by the de Vere family for more than five centuries. The earls served as Lord Great Chamberlain of England and kept their seat at Castle Hedingham in Essex.", True),
            "12540430": ("Oxford's Men", "Oxford's Men Oxford's Men was a company of players under the patronage of the Earls of Oxford. The troupe toured the provinces and performed at court during the reign of Elizabeth I.", True),
            "6127862": ("John de Vere, 16th Earl of Oxford", "John de Vere, 16th Earl of Oxford John de Vere, 16th Earl of Oxford was born to John de Vere, 15th Earl of Oxford, and Elizabeth Trussell, and was styled Lord Bolebec before he succeeded to the earldom in 1540.", True),
            "6127858": ("John de Vere, 16th Earl of Oxford", "John de Vere, 16th Earl of Oxford (1516 – 3 August 1562) was born to John de Vere, 15th Earl of Oxford. He was an English peer who held the hereditary office of Lord Great Chamberlain.", True),
            "17870603": ("De Vere family", "De Vere family The de Vere family were an English aristocratic family who derived their surname from Ver (department Manche, commune Coutances, canton Gavray), in Lower Normandy, France. The family's Norman founder in England, Aubrey (Albericus) de Vere", False),
            "129778": ("Edward de Vere, 17th Earl of Oxford", "was placed in the household of Sir William Cecil, her secretary of state and chief advisor. At 12, de Vere had become the 17th Earl of Oxford, Lord Great Chamberlain of England, and heir to an estate whose annual income", False),
            "6393404": ("Aubrey de Vere, 20th Earl of Oxford", "Kirke and granddaughter of Aurelian Townshend. They had five children: Since he had no surviving sons and as no other suitable claimant came forward, he became the last de Vere Earl of Oxford, one of the longest-lived titles in the peerage of England; the first de Vere", False),
        },
        "question_hits": ["129772", "17870603", "6127861", "129778", "129773"],
        "steps": [
            {
                "task": "Who is Edward De Vere, 17th Earl of Oxford's father?",
                "history_answer": None,
                "hits": ["129772", "6127861", "129773", "14010350", "12540430"],
                "extracted": {
                    "129772": "[No related information about his father.]",
                    "6127861": "[No related information about his father.]",
                    "129773": notes("Edward De Vere, 17th Earl of Oxford's father is John de Vere, 16th Earl of Oxford. This is evidenced by the passage stating, \"De Vere was the only son of John de Vere, 16th Earl of Oxford.\""),
                    "14010350": "[No related information about his father.]",
                    "12540430": "[No related information about his father.]",
                },
                "qa_evidence": "the only son of John de Vere, 16th Earl of Oxford",
                "qa": qa("The question asks for the identity of Edward De Vere's father. The relevant document doc-129773 clearly states that Edward De Vere, 17th Earl of Oxford, is the son of John de Vere, 16th Earl of Oxford. Other documents do not provide additional information about his father.", "John de Vere, 16th Earl of Oxford"),
                "answer": "John de Vere, 16th Earl of Oxford",
            },
            {
                "task": "Who was the father of John de Vere, 16th Earl of Oxford?",
                "history_answer": "John de Vere, 16th Earl of Oxford",
                "hits": ["6127862", "6127858", "17870603", "12540430", "14010350"],
                "extracted": {
                    "6127862": notes("John de Vere, 16th Earl of Oxford was born to John de Vere, 15th Earl of Oxford."),
                    "6127858": notes("John de Vere, 16th Earl of Oxford (1516 – 3 August 1562) was born to John de Vere, 15th Earl of Oxford."),
                    "17870603": "[No related information]",
                    "12540430": "[No related information about his father.]",
                    "14010350": "[No related information about his father.]",
                },
                "qa_evidence": "born to John de Vere, 15th Earl of Oxford",
                "qa": qa("The relevant documents indicate that John de Vere, 15th Earl of Oxford is the father of John de Vere, 16th Earl of Oxford", "John de Vere, 15th Earl of Oxford"),
                "answer": "John de Vere, 15th Earl of Oxford",
            },
        ],
        "final_answer": "John de Vere, 15th Earl of Oxford",
    },
    "lodge": {
        "question": "What role did Thomas Doherty play in sitcom based on the Israeli series \"North Star\"?",
        "gold": ["Sean"],
        "analysis": "The sitcom is not named, so it has to be identified first; then the role can be looked up.",
        "plan": [
            "Identify the sitcom based on the Israeli series North Star.",
            "Determine the character role played by Thomas Doherty in that sitcom.",
        ],
        "passages": {
            "19587422": ("North Star (TV series)", "North Star (TV series) North Star is an Israeli teen drama television series that premiered on a children's channel. The series follows a group of teenagers who spend a summer working at a mountain lodge.", True),
            "19587424": ("North Star (TV series)", "The series was filmed on location in northern Israel. It ran for two seasons and received a nomination for best children's programme at the Israeli Academy awards.", True),
            "14539692": ("Disney Channel (Israel)", "Disney Channel (Israel) Disney Channel Israel is a children's television channel that airs original local productions alongside imported Disney series, dubbed into Hebrew.", True),
            "19587423": ("North Star (TV series)", "International versions The British Disney Channel produces an adapted under the title \"The Lodge\" (working title: \"North Star\"), filmed in Northern Ireland and broadcast on Disney Channel UK.", True),
            "17716638": ("Israeli television", "Israeli television Several Israeli drama formats have been sold abroad and adapted for audiences in the United States and Europe during the 2010s.", True),
            "20322850": ("Thomas Doherty (actor)", "Thomas Doherty (actor) Thomas Doherty (born 21 April 1995) is a Scottish actor, best known for his roles as Harry Hook in Disney Channel's \"Descendants 2\" and as Sean in the British musical comedy-drama, \"The Lodge\". Doherty was born and raised in Edinburgh, Scotland.", False),
            "19608218": ("The Lodge (TV series)", "The Lodge (TV series) The Lodge is a British musical drama series. Its cast includes Sophie Simnett, Luke Newton and Thomas Doherty, who stars in the series.", True),
            "20322852": ("Thomas Doherty (actor)", "On his days off, Doherty split his time between auditioning for \"The Lodge\" and working with the Edinburgh Fringe. Doherty was offered the role of Sean in \"The Lodge\" while still waiting tables in Edinburgh.", True),
            "20322851": ("Thomas Doherty (actor)", "After high school, Doherty attended The MGA Academy of Performing Arts in Edinburgh, Scotland, where he studied music theatre before signing with a management company in London.", True),
            "19608221": ("The Lodge (TV series)", "The second series of the programme was announced in 2017 and premiered the following year, with most of the original cast returning.", True),
        },
        "question_hits": ["20322850", "19587423", "19608218", "20322852", "19587422"],
        "steps": [
            {
                "task": "What is the name of the sitcom that is based on the Israeli series 'North Star'?",
                "history_answer": None,
                "hits": ["19587422", "19587424", "14539692", "19587423", "17716638"],
                "extracted": {
                    "19587422": "[No related information from this document.]",
                    "19587424": "[No related information from this document.]",
                    "14539692": "[No related information from this document.]",
                    "19587423": notes("The sitcom based on the Israeli series 'North Star' is titled \"The Lodge.\" This is evidenced by the passage stating, \"The British Disney Channel produces an adapted under the title 'The Lodge' (working title: 'North Star')\"."),
                    "17716638": "[No related information from this document.]",
                },
                "qa_evidence": "titled \"The Lodge.\"",
                "qa": qa("The question asks for the name of a sitcom that is based on the Israeli series 'North Star'. The relevant document (doc-19587423) clearly states that the sitcom is titled 'The Lodge'. The other documents do not provide any relevant information. Therefore, the answer is straightforward based on the retrieved context.", "The Lodge"),
                "answer": "The Lodge",
            },
            {
                "task": "What character role does Thomas Doherty play in the sitcom 'The Lodge'?",
                "history_answer": "The Lodge",
                "hits": ["20322850", "19608218", "20322852", "20322851", "19608221"],
                "extracted": {
                    "20322850": notes("Thomas Doherty plays the character role of Sean in the British musical comedy-drama, The Lodge. This is directly stated in the passage where it mentions his best-known roles."),
                    "19608218": notes("Thomas Doherty stars in the role of a character in the TV series \"The Lodge.\" The passage does not specify the name of his character or the details of his role"),
                    "20322852": notes("Thomas Doherty plays the role of Sean in the sitcom \"The Lodge.\" This is evidenced by the passage stating, \"offered the role of Sean in 'The Lodge'."),
                    "20322851": "[No related information from this document]",
                    "19608221": "[No related information from this document]",
                },
                "qa_evidence": "role of Sean",
                "qa": qa("The question asks for the character role of Thomas Doherty in 'The Lodge'. The relevant documents consistently indicate that he plays the character named Sean. Therefore, the answer is straightforward based on the retrieved context.", "Sean"),
                "answer": "Sean",
            },
        ],
        "final_answer": "Sean",
    },
    "century": {
        "question": "When was the company that published Woman'S Century founded?",
        "gold": ["October 27, 1893"],
        "analysis": "The publisher of the magazine must be found before its founding date can be looked up.",
        "plan": [
            "Identify the publisher of 'Woman's Century'.",
            "Determine the founding date of the identified publisher.",
        ],
        "passages": {
            "18191569": ("Woman's Century", "Woman's Century Woman's Century was the official organ of the National Council of Women of Canada (NCWC), published in Toronto between 1913 and 1921. The magazine was relatively conservative, and supported World War I, but stood up for women's rights and universal suffrage.", False),
            "18191576": ("Woman's Century", "Citations Sources Woman's Century Woman's Century was the official organ of the National Council of Women of Canada (NCWC), published in Toronto between 1913 and 1921. The founder of \"Woman's Century\" was Jessie Campbell MacIver.", False),
            "3964891": ("The Century Magazine", "The Century Magazine The Century Magazine was first published in the United States in 1881 by The Century Company of New York City, which had been bought in that year by Roswell Smith and renamed by him after the Century Association.", False),
            "12413254": ("National Council of Women of Canada", "also authorized through race-based arguments that linked White women's enfranchisement to the need to protect the nation from \"racial degeneration.\" Between 1914 and 1921 the NCWC published the monthly journal \"Woman's Century\".", False),
            "9717742": ("Women's magazines in Canada", "Women's magazines in Canada Several general-interest magazines for Canadian women appeared in the early twentieth century, most of them published in Toronto or Montreal.", True),
            "12413249": ("National Council of Women of Canada", "National Council of Women of Canada The National Council of Women of Canada (NCWC) is a Canadian advocacy organization. It was founded on October 27, 1893, in Toronto, Ontario.", True),
            "12413257": ("National Council of Women of Canada", "The council lobbied provincial governments on public health and education and sent delegates to the International Council of Women.", True),
            "17476996": ("Local Council of Women of Halifax", "Local Council of Women of Halifax The Local Council was established in 1894 as the local chapter of the National Council of Women of Canada (NCWC).", True),
            "6878896": ("Ishbel Hamilton-Gordon", "In 1893 she helped found the National Council of Women of Canada, which was founded in 1893 while her husband was Governor General.", True),
            "20577251": ("Women's suffrage in Canada", "Women's suffrage in Canada Women in Canada gained the federal vote in stages between 1917 and 1919.", True),
        },
        "question_hits": ["18191576", "18191569", "3964891", "12413254", "9717742"],
        "steps": [
            {
                "task": "Identify the publisher of the magazine 'Woman's Century'",
                "history_answer": None,
                "hits": ["18191569", "18191576", "3964891", "12413254", "9717742"],
                "extracted": {
                    "18191569": notes("The magazine Woman's Century was published by the National Council of Women of Canada (NCWC). This is evidenced by the statement: Woman's Century was the official organ of the National Council of Women of Canada (NCWC)."),
                    "18191576": notes("The magazine 'Woman's Century' was published by the National Council of Women of Canada (NCWC). This is evidenced by the statement: Woman's Century was the official organ of the National Council of Women of Canada (NCWC)."),
                    "3964891": "[No related information from this document.]",
                    "12413254": notes("The magazine Woman's Century was published by the NCWC (National Council of Women of Canada). This is evidenced by the phrase \"Between 1914 and 1921 the NCWC published the monthly journal 'Woman's Century'."),
                    "9717742": "[No related information from this document.]",
                },
                "qa_evidence": "National Council of Women of Canada",
                "qa": qa("Three documents state that Woman's Century was the official organ of the National Council of Women of Canada.", "National Council of Women of Canada (NCWC)"),
                "answer": "National Council of Women of Canada (NCWC)",
            },
            {
                "task": "What is the founding date of the National Council of Women of Canada (NCWC)?",
                "history_answer": "National Council of Women of Canada (NCWC)",
                "hits": ["12413249", "12413257", "17476996", "6878896", "20577251"],
                "extracted": {
                    "12413249": notes("The National Council of Women of Canada (NCWC) was founded on October 27, 1893, in Toronto, Ontario. This is relevant as it directly answers the question regarding the founding date of the organization."),
                    "12413257": "[No related information from this document.]",
                    "17476996": notes("The National Council of Women of Canada (NCWC) was established in 1894, as indicated by the passage stating, \"the Local Council was established in 1894 as the local chapter of the National Council of Women of Canada (NCWC).\""),
                    "6878896": notes("The National Council of Women of Canada was founded in 1893. This information is directly stated in the passage."),
                    "20577251": "[No related information from this document]",
                },
                # the scripted QA only fires when the conflicting note reaches it
                "qa_evidence": "established in 1894",
                "qa": qa("The question asks for the founding date of the National Council of Women of Canada (NCWC). The relevant documents indicate conflicting information: one states it was founded on October 27, 1893, while another mentions 1894. However, multiple documents confirm the 1893 date, making it the more reliable answer.", "October 27, 1893"),
                "answer": "October 27, 1893",
            },
        ],
        "final_answer": "October 27, 1893",
    },
}


def one_hot(ids: list[str], pid: str) -> list[float]:
    v = [0.0] * DIM
    v[ids.index(pid)] = 1.0
    return v


def ranked(ids: list[str], hits: list[str]) -> list[float]:
    v = np.zeros(DIM)
    for w, pid in zip((5, 4, 3, 2, 1), hits):
        v[ids.index(pid)] = w
    return (v / np.linalg.norm(v)).tolist()


def build(name: str, case: dict) -> None:
    out = OUT / name
    out.mkdir(parents=True, exist_ok=True)
    ids = list(case["passages"])
    assert len(ids) == 10 and len(ids) <= DIM

    with open(out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for pid, (title, text, stand_in) in case["passages"].items():
            rec = {"id": pid, "title": title, "text": text}
            if stand_in:
                rec["stand_in"] = True
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    vectors = {text: one_hot(ids, pid) for pid, (_, text, _) in case["passages"].items()}
    vectors[case["question"]] = ranked(ids, case["question_hits"])
    for step in case["steps"]:
        vectors[step["task"]] = ranked(ids, step["hits"])
    (out / "embeddings.json").write_text(
        json.dumps({"name": name, "dim": DIM, "vectors": vectors}, ensure_ascii=False, indent=1) + "\n",
        encoding="utf-8",
    )

    plan_json = json.dumps({"analysis": case["analysis"], "step": case["plan"]}, ensure_ascii=False)
    entries = [{"match": "exact", "pattern": case["question"], "response": plan_json}]
    for cur, step in zip(case["plan"], case["steps"]):
        pattern = "Current step: " + re.escape(cur) + r"\nResults of finished steps:\n"
        if step["history_answer"]:
            pattern += r".*→ Answer: " + re.escape(step["history_answer"])
        entries.append(
            {
                "match": "regex",
                "pattern": pattern,
                "response": json.dumps({"type": "search", "task": step["task"]}, ensure_ascii=False),
            }
        )
    for step in case["steps"]:
        for pid in step["hits"]:
            passage = case["passages"][pid][1]
            entries.append(
                {"match": "exact", "pattern": f"Passage: {passage}\nQuery: {step['task']}?", "response": step["extracted"][pid]}
            )
        entries.append(
            {
                "match": "regex",
                "pattern": r"(?s)^Retrieved information:\n(?=.*" + re.escape(step["qa_evidence"]) + r").*\nQuestion:\n"
                + re.escape(step["task"]) + r"\Z",
                "response": step["qa"],
            }
        )
    # anything off-script: no evidence, no answer
    entries.append({"match": "regex", "pattern": r"^Passage: ", "response": SENTINEL})
    entries.append(
        {
            "match": "regex",
            "pattern": r"^Retrieved information:",
            "response": json.dumps({"analysis": "The context does not answer the question.", "answer": "", "success": "no", "rating": 1}),
        }
    )
    with open(out / "script.jsonl", "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e, ensure_ascii=False) + "\n")

    (out / "engine.ini").write_text(
        "[orchestrator]\nk = 5\n\n"
        "[llm_backend]\nbackend = scripted:script.jsonl\n\n"
        "[retrieval]\nindex = index.bin\nembedder = lookup:embeddings.json\n",
        encoding="utf-8",
    )

    expected = {
        "question": case["question"],
        "gold": case["gold"],
        "plan": case["plan"],
        "steps": [{"task": s["task"], "doc_ids": s["hits"], "answer": s["answer"]} for s in case["steps"]],
        "final_answer": case["final_answer"],
    }
    (out / "case.json").write_text(json.dumps(expected, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def main() -> None:
    for name, case in CASES.items():
        build(name, case)
        print(f"wrote {OUT / name}")


if __name__ == "__main__":
    main()
