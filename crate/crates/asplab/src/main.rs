fn main() {
    println!("asplab");
}
