//! Term extraction from judicial prose: Chinese and Arabic numerals,
//! year/month combinations, distractor numbers, and the structured opinion
//! and verdict formats.
//!
//! ```bash
//! cargo run --example term_parsing
//! ```

use collegial_bench::term_parser::{
    chinese_numeral_to_int, extract_prison_term_months, parse_consensus, parse_opinion,
};

fn main() {
    println!("Chinese numerals:");
    for numeral in ["五十四", "十", "三百零六", "两", "一千二百三十四"] {
        println!("  {numeral} -> {:?}", chinese_numeral_to_int(numeral));
    }

    println!("\nTerm extraction (last complete expression wins):");
    let samples = [
        "判处有期徒刑三年六个月",
        "Sentence Term: 60 months ... 60个月",
        "一审判处五年，二审改判三年六个月",
        "诈骗人民币300,000元，依据第266条，判处四年",
        "本案不涉及刑期",
    ];
    for text in samples {
        println!("  {text:?} -> {:?}", extract_prison_term_months(text));
    }

    println!("\nStructured opinion:");
    let opinion = parse_opinion("刑期：48个月\n理由：情节严重但有悔罪表现。").unwrap();
    println!(
        "  term = {} months, rationale = {}",
        opinion.term_months, opinion.rationale
    );

    println!("\nConsensus verdicts:");
    for text in [
        "Conclusion: No\nMain Points of Disagreement: the proposed terms differ widely.",
        "Conclusion: Yes\nThe final sentencing opinion is: 54 months",
    ] {
        let verdict = parse_consensus(text).unwrap();
        println!(
            "  consensus = {}, summary = {}",
            verdict.consensus, verdict.summary
        );
    }
}
