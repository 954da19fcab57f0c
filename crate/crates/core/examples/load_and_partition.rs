//! Writes a synthetic graph to a TSV file, loads it back and splits it into
//! a public pool and three overlapping clients.

use fkge_lab::kg::{generate_synthetic, load_triples, partition_federated, split_public, write_triples};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let syn = generate_synthetic(300, 12, 4000, 7)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("triples.tsv");
    write_triples(&path, &syn.graph, syn.graph.triples())?;

    let loaded = load_triples(&path, None, None)?;
    println!(
        "loaded {} triples over {} entities and {} relations ({} duplicates dropped)",
        loaded.graph.len(),
        loaded.graph.num_entities(),
        loaded.graph.num_relations(),
        loaded.duplicates
    );

    let (private, public) = split_public(&loaded.graph, 0.1, 7)?;
    println!("public pool: {} triples", public.len());
    let p = partition_federated(&private, 3, 0.3, (0.8, 0.1, 0.1), 7)?;
    for c in &p.clients {
        println!(
            "client {}: {} entities, {} relations, train/valid/test {}/{}/{}",
            c.id,
            c.num_entities(),
            c.num_relations(),
            c.train.len(),
            c.valid.len(),
            c.test.len()
        );
    }
    let m = p.manifest();
    println!("{} entities held by more than one client", m.overlapping.len());
    Ok(())
}
