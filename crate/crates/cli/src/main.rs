fn main() {
    println!("resetless");
}
