from offsetforge.cli import main

main()
