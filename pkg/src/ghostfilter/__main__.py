from ghostfilter.cli import main

main()
