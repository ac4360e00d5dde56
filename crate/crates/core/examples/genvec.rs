//! Regenerate the golden wire-format vector hex. Run after an
//! intentional format change and paste the output into
//! `src/vectors.rs` and FORMATS.md.

fn main() {
    let v = towerchannel::vectors::build_vector_exchange();
    println!("PROPOSAL={}", hex::encode(v.proposal.encode()));
    println!("REPLY={}", hex::encode(v.reply.encode()));
    println!("SUBMISSION={}", hex::encode(v.submission.encode()));
    println!("RECEIPT={}", hex::encode(v.receipt.encode()));
    println!("ASSERTION={}", hex::encode(v.assertion.encode()));
    println!("CID={}", v.cid.to_hex());
    println!("R={}", v.r.to_hex());
    println!("H={}", towerchannel::types::hash_commit(&v.state, &v.r).to_hex());
}
