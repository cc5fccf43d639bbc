import json

import pytest

from leaf.corpus import DistractorRecord, QARecord


def make_qa_json(articles):
    """Build a QA-corpus JSON document from [(context, [(qid, question, answer, start)])]."""
    data = []
    for ai, (context, qas) in enumerate(articles):
        data.append({
            "title": f"article-{ai}",
            "paragraphs": [{
                "context": context,
                "qas": [
                    {
                        "id": qid,
                        "question": question,
                        "answers": [{"text": answer, "answer_start": start}],
                    }
                    for qid, question, answer, start in qas
                ],
            }],
        })
    return {"data": data}


@pytest.fixture
def squad_file(tmp_path):
    def write(articles, name="train.json"):
        path = tmp_path / name
        path.write_text(json.dumps(make_qa_json(articles)), encoding="utf-8")
        return path

    return write


@pytest.fixture
def race_file(tmp_path):
    def write(articles, name="race.jsonl"):
        path = tmp_path / name
        lines = [json.dumps(article) for article in articles]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture
def qa_record():
    context = "The Eiffel Tower was completed in 1889. It stands in Paris."
    return QARecord(
        id="q1",
        context=context,
        question="When was the Eiffel Tower completed?",
        answer="1889",
        answer_start=context.index("1889"),
    )


@pytest.fixture
def distractor_record():
    return DistractorRecord(
        id="r1:q0",
        context="Plants take in carbon dioxide and release oxygen during photosynthesis.",
        question="What gas do plants release?",
        answer="oxygen",
        distractors=["carbon dioxide", "nitrogen", "hydrogen"],
    )
